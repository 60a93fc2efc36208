"""Computationally complete active chart parser over the same grammar.

Items are head-rooted dependency subtrees (one reading per token to start
with), combined root-under-root: an item's head word may fill one of its
open valencies with another item's root. Every combination attempt runs
the same counted syntax check, and on syntactic success the same counted
concept check, as the protocol engine, so call-count comparisons measure
strategy rather than implementation drift.

No packing or structure sharing: each interpretation variant is a
separate item with its own cloned context. Duplicate items (same root
reading, coverage, edges and readings — which fixes the interpretation up
to instance renaming) are suppressed. The standard variant requires
contiguous coverage (computed over non-punctuation positions); the
discontinuous variant allows any disjoint combination whose result has at
most `gap_cap` internal gaps. An edge ceiling turns runaway item growth
into a clean resource failure.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .actors import PhraseActor, WordActor, _fresh_wid
from .engine import ParseTimeout
from .errors import ChartResourceError, KBError, ParseInputError
from .grammar import Grammar, syntax_check
from .kb import KB, ContextStore, concept_check
from .metrics import MetricsRecord
from .results import (
    PUNCTUATION,
    Analysis,
    ParseResult,
    dedupe_analyses,
    universe,
)

import time


@dataclass
class ChartConfig:
    variant: str = "standard"          # "standard" | "discontinuous"
    edge_ceiling: int = 100_000
    gap_cap: int = 2
    timeout_s: Optional[float] = None

    def __post_init__(self):
        if self.variant not in ("standard", "discontinuous"):
            raise ValueError(f"unknown chart variant {self.variant!r}")


class _Chart:
    def __init__(self, grammar: Grammar, kb: KB, config: ChartConfig,
                 metrics: MetricsRecord):
        self.g = grammar
        self.kb = kb
        self.cfg = config
        self.m = metrics
        self.store = ContextStore(kb)
        self.items: list[PhraseActor] = []
        self.agenda: deque[PhraseActor] = deque()
        self.seen: set[tuple] = set()
        self.created = 0
        self._deadline = None

    def _rank(self, positions: frozenset[int]) -> list[int]:
        return sorted(self._ranks[p] for p in positions)

    def _contiguous(self, positions: frozenset[int]) -> bool:
        ranks = self._rank(positions)
        return ranks[-1] - ranks[0] + 1 == len(ranks)

    def _gap_count(self, positions: frozenset[int]) -> int:
        ranks = self._rank(positions)
        gaps = 0
        for a, b in zip(ranks, ranks[1:]):
            if b - a > 1:
                gaps += 1
        return gaps

    def _coverage_ok(self, merged: frozenset[int]) -> bool:
        if self.cfg.variant == "standard":
            return self._contiguous(merged)
        return self._gap_count(merged) <= self.cfg.gap_cap

    def _admit(self, item: PhraseActor) -> bool:
        key = item.analysis_key()
        if key in self.seen:
            return False
        self.seen.add(key)
        self.created += 1
        if self.created > self.cfg.edge_ceiling:
            raise ChartResourceError(self.created, self.cfg.edge_ceiling)
        self.agenda.append(item)
        return True

    def _combine(self, head_item: PhraseActor, mod_item: PhraseActor):
        if head_item.coverage & mod_item.coverage:
            return
        merged = head_item.coverage | mod_item.coverage
        if not self._coverage_ok(merged):
            return
        head = head_item.root
        mod = mod_item.root
        for v in head.open_valencies():
            if not syntax_check(self.g, head, mod, v, self.m):
                continue
            if v.role is None:
                ctx = self.store.merge(head_item.ctx, mod_item.ctx)
            else:
                if head.instance is None or mod.instance is None:
                    continue
                base = self.store.merge(head_item.ctx, mod_item.ctx)
                ctx = concept_check(
                    self.store, base, head.instance, v.role, mod.instance, self.m
                )
                if ctx is None:
                    continue
            new_head = head_item.copy()
            new_mod = mod_item.copy()
            words = {**new_head.words, **new_mod.words}
            words[head.wid].filled[v.label] = mod.wid
            words[mod.wid].head = (head.wid, v.label)
            unified = words[mod.wid].features.unify(v.features)
            if unified is not None:
                words[mod.wid].features = unified
            self._admit(PhraseActor(words, head_item.root_wid, ctx))

    def parse(self, tokens: list[str]) -> ParseResult:
        if not tokens:
            raise ParseInputError("empty token list")
        token_universe = universe(tokens)
        self._ranks = {p: i for i, p in enumerate(sorted(token_universe))}
        if self.cfg.timeout_s is not None:
            self._deadline = time.monotonic() + self.cfg.timeout_s
        resource_failure = False
        try:
            for pos, token in enumerate(tokens):
                if token in PUNCTUATION:
                    continue
                entries = self.g.lookup(token) or [self.g.unknown_entry(token)]
                for entry in entries:
                    if entry.concept is not None and not self.kb.has_concept(entry.concept):
                        raise KBError(
                            f"lexeme {token!r} names concept {entry.concept!r} "
                            "that the KB does not declare"
                        )
                    word = WordActor(
                        wid=_fresh_wid(),
                        word_class=entry.word_class,
                        position=pos,
                        features=self.g.word_features(entry),
                        frame=self.g.frame(entry.word_class),
                        entry=entry,
                    )
                    ctx = self.store.clone(self.store.root)
                    if entry.concept is not None:
                        word.instance = self.store.assert_instance(ctx, entry.concept)
                    self._admit(PhraseActor({word.wid: word}, word.wid, ctx))
            while self.agenda:
                if self._deadline is not None and time.monotonic() > self._deadline:
                    raise ParseTimeout("per-sentence time budget exceeded")
                item = self.agenda.popleft()
                for other in self.items:
                    self._combine(item, other)
                    self._combine(other, item)
                self.items.append(item)
        except ChartResourceError:
            resource_failure = True
        return self._finalize(token_universe, resource_failure)

    def _finalize(self, token_universe: frozenset[int], resource_failure: bool) -> ParseResult:
        analyses: list[Analysis] = []
        best_cov: frozenset[int] = frozenset()
        if not resource_failure:
            for item in self.items:
                if (len(item.coverage), sorted(item.coverage)) > (
                    len(best_cov), sorted(best_cov)
                ):
                    best_cov = item.coverage
            for item in self.items:
                if item.coverage != best_cov:
                    continue
                root = item.root.position
                analyses.append(
                    Analysis(
                        root=root if root is not None else -1,
                        coverage=item.coverage,
                        edges=tuple(item.edge_triples()),
                        interpretation=self.store.extract(item.ctx),
                        entry_classes=tuple(
                            (w.position, w.word_class)
                            for w in sorted(
                                item.words.values(), key=lambda w: w.sort_position()
                            )
                        ),
                    )
                )
        analyses = dedupe_analyses(analyses)
        skipped = token_universe - best_cov if analyses else frozenset()
        complete = bool(analyses) and best_cov == token_universe
        self.m.skipped_tokens = len(skipped)
        self.m.complete = complete
        return ParseResult(
            analyses=analyses,
            skipped=frozenset(skipped),
            complete=complete,
            metrics=self.m,
            resource_failure=resource_failure,
        )


def chart_parse(tokens: list[str], grammar: Grammar, kb: KB,
                config: ChartConfig | None = None,
                metrics: MetricsRecord | None = None) -> ParseResult:
    """Parse one sentence with the chart baseline."""
    cfg = config if config is not None else ChartConfig()
    m = metrics if metrics is not None else MetricsRecord()
    return _Chart(grammar, kb, cfg, m).parse(tokens)
