"""Local coherence: centers, nominal anaphora, referent merging.

After each utterance the session keeps a backward-looking center and the
ranked forward-looking centers of that utterance. Ranking is grammatical
obliqueness (subject > direct object > other) with token position as the
tie-break, so it is recomputable from the chosen analysis.

A definite nominal in the next utterance triggers searchNomAntecedent:
the forward-looking centers are tried in rank order, and the first one
that agrees in number (feature unification) and whose concept is subsumed
by the anaphor's concept (a counted concept check) is the antecedent. Its
discourse referent then replaces the anaphor's own instance in the
utterance's interpretation context, which makes the cross-sentence
sharing visible in the merged interpretation graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from .actors import PhraseActor, WordActor
from .engine import Engine, ParseConfig
from .features import FeatureStructure
from .grammar import Grammar
from .kb import KB, ContextStore, Interpretation, _instance_key
from .metrics import MetricsRecord
from .results import PUNCTUATION, ParseResult

SENTENCE_FINAL = {".", "!", "?"}


@dataclass(frozen=True)
class Referent:
    """A discourse referent as realized by one nominal word."""

    instance_id: str
    concept: str
    utterance: int
    token: int
    surface: str
    features: FeatureStructure
    role_rank: int   # 0 subject, 1 direct object, 2 other

    def rank_key(self) -> tuple[int, int]:
        return (self.role_rank, self.token)


@dataclass(frozen=True)
class CenteringState:
    cb: Optional[Referent] = None
    cf: tuple[Referent, ...] = ()


@dataclass
class ResolutionRecord:
    utterance: int
    token: int
    antecedent_utterance: Optional[int]
    antecedent_token: Optional[int]

    def to_dict(self) -> dict:
        return {
            "utterance": self.utterance,
            "token": self.token,
            "antecedentUtterance": self.antecedent_utterance,
            "antecedentToken": self.antecedent_token,
        }


@dataclass
class UtteranceResult:
    index: int
    tokens: list[str]
    parse: ParseResult
    referents: tuple[Referent, ...]
    state: CenteringState   # state AFTER this utterance


@dataclass
class TextResult:
    utterances: list[UtteranceResult]
    resolutions: list[ResolutionRecord]
    interpretation: Interpretation
    metrics: MetricsRecord

    def to_dict(self) -> dict:
        return {
            "utterances": [
                {
                    "tokens": u.tokens,
                    "cb": u.state.cb.instance_id if u.state.cb else None,
                    "cf": [r.instance_id for r in u.state.cf],
                    "analyses": len(u.parse.analyses),
                    "complete": u.parse.complete,
                }
                for u in self.utterances
            ],
            "resolutions": [r.to_dict() for r in self.resolutions],
            "interpretation": self.interpretation.to_dict(),
            "metrics": self.metrics.to_dict(),
        }


def split_utterances(tokens: list[str]) -> list[list[str]]:
    """Cut a document token stream at sentence-final punctuation."""
    utterances: list[list[str]] = []
    current: list[str] = []
    for token in tokens:
        if token in SENTENCE_FINAL:
            if current:
                utterances.append(current)
            current = []
        else:
            current.append(token)
    if current:
        utterances.append(current)
    return utterances


def rank_referents(referents: list[Referent]) -> tuple[Referent, ...]:
    return tuple(sorted(referents, key=lambda r: r.rank_key()))


def update_centers(referents: list[Referent], state: CenteringState) -> CenteringState:
    """New centering state after an utterance whose referents are given.

    The new backward-looking center is the highest-ranked member of the
    previous forward-looking centers realized (by referent identity) in
    this utterance.
    """
    realized = {r.instance_id for r in referents}
    cb = next((r for r in state.cf if r.instance_id in realized), None)
    return CenteringState(cb=cb, cf=rank_referents(referents))


def search_nom_antecedent(anaphor: WordActor, state: CenteringState,
                          kb: KB, metrics: MetricsRecord) -> Optional[Referent]:
    """First forward-looking center passing agreement and concept checks."""
    if anaphor.entry is None or anaphor.entry.concept is None:
        return None
    for candidate in state.cf:
        if anaphor.features.project("num").unify(
            candidate.features.project("num")
        ) is None:
            continue
        metrics.count_concept_check(anaphora=True)
        if kb.subsumes(anaphor.entry.concept, candidate.concept):
            return candidate
    return None


def resolve(store: ContextStore, phrase: PhraseActor, anaphor: WordActor,
            antecedent: Referent) -> str:
    """Replace the anaphor's discourse referent by the antecedent's.

    Returns the phrase's new context id; the phrase is updated in place
    (callers resolve on a private copy of the chosen analysis). Dependency
    edges are untouched and the assertion count is preserved.
    """
    old = anaphor.instance.id if anaphor.instance is not None else None
    if old is None:
        raise ValueError("anaphor carries no discourse referent")
    new_ctx = store.substitute(phrase.ctx, old, antecedent.instance_id)
    phrase.ctx = new_ctx
    for w in phrase.words.values():
        if w.instance is not None and w.instance.id == old:
            w.instance = replace(w.instance, id=antecedent.instance_id, context=new_ctx)
    return new_ctx


class TextSession:
    """Parses a document utterance by utterance, resolving nominal anaphora."""

    def __init__(self, grammar: Grammar, kb: KB, config: ParseConfig | None = None,
                 *, nominal_class: str = "Nominal",
                 subject_labels: frozenset[str] = frozenset({"subj"}),
                 object_labels: frozenset[str] = frozenset({"obj"})):
        self.g = grammar
        self.kb = kb
        self.cfg = config if config is not None else ParseConfig()
        self.nominal_class = nominal_class
        self.subject_labels = subject_labels
        self.object_labels = object_labels
        self.metrics = MetricsRecord()
        self.store = ContextStore(kb)

    # -- helpers -------------------------------------------------------------

    def _is_nominal(self, word: WordActor) -> bool:
        if word.is_placeholder:
            return False
        if self.nominal_class not in self.g.classes:
            return word.instance is not None
        return self.g.subsumes(self.nominal_class, word.word_class)

    def _is_definite(self, word: WordActor, phrase: PhraseActor) -> bool:
        if word.features.get("def") == "+":
            return True
        for mwid in word.filled.values():
            mod = phrase.words[mwid]
            if mod.features.get("def") == "+" and mod.word_class == "Determiner":
                return True
        return False

    def _role_rank(self, word: WordActor) -> int:
        if word.head is None:
            return 2
        label = word.head[1]
        if label in self.subject_labels:
            return 0
        if label in self.object_labels:
            return 1
        return 2

    def _referents(self, phrase: PhraseActor, utterance: int) -> list[Referent]:
        refs = []
        for w in sorted(phrase.words.values(), key=lambda w: w.sort_position()):
            if not self._is_nominal(w) or w.instance is None or w.position is None:
                continue
            refs.append(
                Referent(
                    instance_id=w.instance.id,
                    concept=self.store.concept_of(phrase.ctx, w.instance.id),
                    utterance=utterance,
                    token=w.position,
                    surface=w.surface,
                    features=w.features,
                    role_rank=self._role_rank(w),
                )
            )
        return refs

    def _chosen_phrase(self, engine: Engine) -> Optional[PhraseActor]:
        live = [c for c in engine.chain if not c.is_barrier]
        main = None
        for c in live:
            if main is None or len(c.coverage) >= len(main.coverage):
                main = c
        if main is None:
            return None
        candidates = [p for p in main.phrases if not p.has_placeholder()]
        if not candidates:
            return None
        chosen = min(candidates, key=lambda p: p.analysis_key())
        return chosen.copy()

    # -- driver ----------------------------------------------------------------

    def run(self, tokens: list[str]) -> TextResult:
        state = CenteringState()
        utterances = []
        resolutions = []
        merged_instances: dict[str, str] = {}
        merged_assertions: list[tuple[str, str, str]] = []
        for idx, utterance in enumerate(split_utterances(tokens)):
            engine = Engine(self.g, self.kb, self.cfg, self.metrics, store=self.store)
            result = engine.parse(utterance)
            phrase = self._chosen_phrase(engine)
            referents: list[Referent] = []
            if phrase is not None:
                for w in sorted(phrase.words.values(), key=lambda w: w.sort_position()):
                    if (
                        self._is_nominal(w)
                        and w.instance is not None
                        and self._is_definite(w, phrase)
                    ):
                        antecedent = search_nom_antecedent(w, state, self.kb, self.metrics)
                        if antecedent is not None:
                            resolve(self.store, phrase, w, antecedent)
                            resolutions.append(
                                ResolutionRecord(idx, w.position,
                                                 antecedent.utterance, antecedent.token)
                            )
                        else:
                            resolutions.append(ResolutionRecord(idx, w.position, None, None))
                referents = self._referents(phrase, idx)
                graph = self.store.extract(phrase.ctx)
                for iid, concept in graph.instances:
                    merged_instances.setdefault(iid, concept)
                merged_assertions.extend(graph.assertions)
            state = update_centers(referents, state)
            utterances.append(
                UtteranceResult(idx, utterance, result, tuple(referents), state)
            )
        interpretation = Interpretation(
            instances=sorted(merged_instances.items(), key=lambda kv: _instance_key(kv[0])),
            assertions=merged_assertions,
        )
        return TextResult(utterances, resolutions, interpretation, self.metrics)
