"""Exception types shared across the package."""


class ActorParseError(Exception):
    """Base class for all package errors."""


class GrammarError(ActorParseError):
    """Malformed or inconsistent grammar definition."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class KBError(ActorParseError):
    """Malformed or inconsistent knowledge-base definition."""


class UnknownConceptError(KBError):
    pass


class UnknownContextError(KBError):
    pass


class DanglingInstanceError(KBError):
    pass


class UnknownRoleError(KBError):
    pass


class ParseInputError(ActorParseError):
    """Bad input handed to a parser entry point (e.g. empty token list)."""


class StaleOfferError(ActorParseError):
    """An attachment offer refers to containers already superseded."""


class UnknownPredicateError(ActorParseError):
    """Preference predicate id not registered."""


class ChartResourceError(ActorParseError):
    """Chart edge count exceeded the configured ceiling."""

    def __init__(self, edges, ceiling):
        super().__init__(f"chart exceeded edge ceiling: {edges} > {ceiling}")
        self.edges = edges
        self.ceiling = ceiling
