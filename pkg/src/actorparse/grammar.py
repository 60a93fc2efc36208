"""Lexicalized dependency grammar.

A grammar is a single-rooted word-class tree plus a full-form lexicon.
Word classes carry default features, valency slots (head-side attachment
constraints on modifiers) and optional word-class predictions. Valencies
are inherited down the class tree; a subclass valency with the same label
overrides the inherited one.

The grammar file format is JSON with top-level keys ``classes`` and
``lexicon``::

    {"classes": [{"name": "Noun", "parent": "Nominal",
                  "features": {"num": "sg"},
                  "valencies": [{"label": "det", "direction": "left",
                                 "target": "Determiner", "mandatory": false,
                                 "features": {}, "role": null}],
                  "predictions": [{"slot": "head", "class": "Nominal",
                                   "mandatory": true}]},
                 ...],
     "lexicon": [{"surface": "printer", "class": "Noun",
                  "features": {"num": "sg"}, "concept": "PRINTER"}, ...]}

``direction: "left"`` means the modifier precedes its head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import GrammarError
from .features import EMPTY, FeatureStructure

UNKNOWN_CLASS = "UnknownWord"


class Direction(str, Enum):
    LEFT = "left"    # modifier precedes the head
    RIGHT = "right"  # modifier follows the head


class Slot(str, Enum):
    HEAD = "head"
    MODIFIER = "modifier"


@dataclass(frozen=True)
class Valency:
    """One attachment slot offered by a head word."""

    label: str
    direction: Direction
    target: str
    mandatory: bool = False
    features: FeatureStructure = EMPTY
    role: Optional[str] = None


@dataclass(frozen=True)
class Prediction:
    """Declared expectation about a not-yet-read head or modifier."""

    slot: Slot
    predicted_class: str
    mandatory: bool = True


@dataclass(frozen=True)
class LexemeEntry:
    """One reading of a surface form."""

    surface: str
    word_class: str
    features: FeatureStructure = EMPTY
    concept: Optional[str] = None


@dataclass
class WordClass:
    name: str
    parent: Optional[str] = None
    default_features: FeatureStructure = EMPTY
    valencies: tuple[Valency, ...] = ()
    predictions: tuple[Prediction, ...] = ()


class Grammar:
    """Validated class tree plus lexicon, immutable after construction."""

    def __init__(self, classes: Iterable[WordClass], lexicon: Iterable[LexemeEntry]):
        self.classes: dict[str, WordClass] = {}
        for cls in classes:
            if cls.name in self.classes:
                raise GrammarError(f"duplicate class {cls.name!r}")
            self.classes[cls.name] = cls
        if UNKNOWN_CLASS not in self.classes:
            root = self._find_root()
            self.classes[UNKNOWN_CLASS] = WordClass(UNKNOWN_CLASS, parent=root)
        self.root = self._find_root()
        self._ancestors = self._compute_ancestors()
        self._frames = {name: self._effective_frame(name) for name in self.classes}
        self._class_features = {
            name: self._effective_features(name) for name in self.classes
        }
        self._predictions = {
            name: self._effective_predictions(name) for name in self.classes
        }
        self.lexicon: dict[str, list[LexemeEntry]] = {}
        for entry in lexicon:
            if entry.word_class not in self.classes:
                raise GrammarError(
                    f"lexeme {entry.surface!r} names undeclared class {entry.word_class!r}"
                )
            self.lexicon.setdefault(entry.surface, []).append(entry)
        for name, cls in self.classes.items():
            for v in cls.valencies:
                if v.target not in self.classes:
                    raise GrammarError(
                        f"class {name!r}: valency {v.label!r} targets undeclared class {v.target!r}"
                    )
            for p in cls.predictions:
                if p.predicted_class not in self.classes:
                    raise GrammarError(
                        f"class {name!r}: prediction names undeclared class {p.predicted_class!r}"
                    )

    def _find_root(self) -> str:
        roots = [c.name for c in self.classes.values() if c.parent is None]
        if len(roots) != 1:
            raise GrammarError(f"class tree must have exactly one root, found {roots}")
        return roots[0]

    def _compute_ancestors(self) -> dict[str, tuple[str, ...]]:
        ancestors: dict[str, tuple[str, ...]] = {}
        for name in self.classes:
            chain = []
            seen = set()
            current: Optional[str] = name
            while current is not None:
                if current in seen:
                    raise GrammarError(f"class graph contains a cycle through {current!r}")
                seen.add(current)
                chain.append(current)
                parent = self.classes.get(current)
                if parent is None:
                    raise GrammarError(f"class {chain[-2]!r} names undeclared parent {current!r}")
                current = parent.parent
            ancestors[name] = tuple(chain)  # name first, root last
        return ancestors

    def _lineage(self, name: str) -> tuple[str, ...]:
        """Root-first chain of classes from the root down to `name`."""
        return tuple(reversed(self._ancestors[name]))

    def _effective_frame(self, name: str) -> tuple[Valency, ...]:
        frame: dict[str, Valency] = {}
        order: list[str] = []
        for cls_name in self._lineage(name):
            for v in self.classes[cls_name].valencies:
                if v.label not in frame:
                    order.append(v.label)
                frame[v.label] = v  # same label in a subclass overrides
        return tuple(frame[label] for label in order)

    def _effective_features(self, name: str) -> FeatureStructure:
        merged: dict[str, str] = {}
        for cls_name in self._lineage(name):
            merged.update(self.classes[cls_name].default_features)
        return FeatureStructure(merged)

    def _effective_predictions(self, name: str) -> tuple[Prediction, ...]:
        preds: list[Prediction] = []
        for cls_name in self._lineage(name):
            preds.extend(self.classes[cls_name].predictions)
        return tuple(preds)

    # -- queries -----------------------------------------------------------

    def subsumes(self, general: str, specific: str) -> bool:
        """True iff `general` equals `specific` or is one of its ancestors."""
        if general not in self.classes:
            raise GrammarError(f"unknown class {general!r}")
        if specific not in self.classes:
            raise GrammarError(f"unknown class {specific!r}")
        return general in self._ancestors[specific]

    def frame(self, word_class: str) -> tuple[Valency, ...]:
        try:
            return self._frames[word_class]
        except KeyError:
            raise GrammarError(f"unknown class {word_class!r}") from None

    def predictions(self, word_class: str) -> tuple[Prediction, ...]:
        try:
            return self._predictions[word_class]
        except KeyError:
            raise GrammarError(f"unknown class {word_class!r}") from None

    def lookup(self, surface: str) -> list[LexemeEntry]:
        return list(self.lexicon.get(surface, []))

    def word_features(self, entry: LexemeEntry) -> FeatureStructure:
        """Class default features (root to leaf) overlaid by lexeme features."""
        merged = dict(self._class_features[entry.word_class])
        merged.update(entry.features)
        return FeatureStructure(merged)

    def subclasses(self, name: str) -> list[str]:
        """All classes subsumed by `name` (including itself), declaration order."""
        return [c for c in self.classes if self.subsumes(name, c)]

    def unknown_entry(self, surface: str) -> LexemeEntry:
        return LexemeEntry(surface=surface, word_class=UNKNOWN_CLASS)


def class_subsumes(grammar: Grammar, general: str, specific: str) -> bool:
    return grammar.subsumes(general, specific)


def syntax_check(grammar, head, modifier, valency, metrics) -> bool:
    """Full syntactic admissibility test for one (head, modifier, slot) triple.

    Counts exactly one check, pass or fail. True iff the slot is unfilled
    on the head, the modifier's class is subsumed by the slot's target,
    the modifier's features unify with the slot constraint, and the
    modifier sits on the side of the head the slot demands.

    `head` and `modifier` are word actors (anything with ``word_class``,
    ``features``, ``position`` and, for the head, ``filled``).
    """
    metrics.count_syntax_check()
    if valency.label in head.filled:
        return False
    if not grammar.subsumes(valency.target, modifier.word_class):
        return False
    if modifier.features.unify(valency.features) is None:
        return False
    return _direction_ok(head.position, modifier.position, valency.direction)


def _direction_ok(head_pos, mod_pos, direction: Direction) -> bool:
    # Placeholder words carry position None and count as rightmost.
    if head_pos is None and mod_pos is None:
        return False
    if direction is Direction.LEFT:  # modifier precedes head
        return head_pos is None or (mod_pos is not None and mod_pos < head_pos)
    return mod_pos is None or (head_pos is not None and mod_pos > head_pos)


# -- loading ---------------------------------------------------------------


def load_grammar(source) -> Grammar:
    """Load a grammar from a path, JSON string, or already-parsed dict."""
    doc = _read_json(source, GrammarError)
    if not isinstance(doc, dict):
        raise GrammarError("grammar document must be a JSON object")
    classes = []
    for raw in doc.get("classes", []):
        try:
            classes.append(
                WordClass(
                    name=raw["name"],
                    parent=raw.get("parent"),
                    default_features=FeatureStructure(raw.get("features", {})),
                    valencies=tuple(_parse_valency(v) for v in raw.get("valencies", [])),
                    predictions=tuple(
                        _parse_prediction(p) for p in raw.get("predictions", [])
                    ),
                )
            )
        except KeyError as exc:
            raise GrammarError(f"class definition missing key {exc}") from None
    lexicon = []
    for raw in doc.get("lexicon", []):
        try:
            lexicon.append(
                LexemeEntry(
                    surface=raw["surface"],
                    word_class=raw["class"],
                    features=FeatureStructure(raw.get("features", {})),
                    concept=raw.get("concept"),
                )
            )
        except KeyError as exc:
            raise GrammarError(f"lexicon entry missing key {exc}") from None
    return Grammar(classes, lexicon)


def _parse_valency(raw: dict) -> Valency:
    try:
        direction = Direction(raw["direction"])
    except ValueError:
        raise GrammarError(f"bad valency direction {raw.get('direction')!r}") from None
    except KeyError:
        raise GrammarError("valency missing 'direction'") from None
    try:
        return Valency(
            label=raw["label"],
            direction=direction,
            target=raw["target"],
            mandatory=bool(raw.get("mandatory", False)),
            features=FeatureStructure(raw.get("features", {})),
            role=raw.get("role"),
        )
    except KeyError as exc:
        raise GrammarError(f"valency missing key {exc}") from None


def _parse_prediction(raw: dict) -> Prediction:
    try:
        slot = Slot(raw["slot"])
    except ValueError:
        raise GrammarError(f"bad prediction slot {raw.get('slot')!r}") from None
    except KeyError:
        raise GrammarError("prediction missing 'slot'") from None
    try:
        return Prediction(
            slot=slot,
            predicted_class=raw["class"],
            mandatory=bool(raw.get("mandatory", True)),
        )
    except KeyError as exc:
        raise GrammarError(f"prediction missing key {exc}") from None


def _read_json(source, error_cls):
    if isinstance(source, dict):
        return source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and source.endswith(".json")):
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise error_cls(exc.msg, line=exc.lineno) from None
