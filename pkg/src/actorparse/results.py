"""Parse results and their serialization, shared by both parsers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .kb import Interpretation
from .metrics import MetricsRecord

PUNCTUATION = {".", ",", ";", ":", "!", "?"}


def universe(tokens: list[str]) -> frozenset[int]:
    """Positions that take part in analyses (punctuation is excluded)."""
    return frozenset(i for i, t in enumerate(tokens) if t not in PUNCTUATION)


@dataclass(frozen=True)
class Analysis:
    """One dependency tree plus its terminological interpretation."""

    root: int
    coverage: frozenset[int]
    edges: tuple[tuple[int, int, str], ...]   # (head pos, modifier pos, label)
    interpretation: Interpretation
    entry_classes: tuple[tuple[int, str], ...] = ()   # (position, word class)

    def edge_set(self) -> frozenset[tuple[int, int, str]]:
        return frozenset(self.edges)

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "coverage": sorted(self.coverage),
            "edges": [
                {"head": h, "modifier": m, "label": l} for h, m, l in self.edges
            ],
            "interpretation": self.interpretation.to_dict(),
        }

    def sort_key(self) -> tuple:
        return (
            tuple(sorted(self.coverage)),
            self.edges,
            self.entry_classes,
            self.interpretation.signature(),
        )


@dataclass
class TraceEvent:
    seq: int
    msg_type: str
    from_actor: str
    to_actor: str
    outcome: str

    def line(self) -> str:
        return f"{self.seq},{self.msg_type},{self.from_actor},{self.to_actor},{self.outcome}"


@dataclass
class ParseResult:
    analyses: list[Analysis]
    skipped: frozenset[int]
    complete: bool
    metrics: MetricsRecord
    deferred: list[Analysis] = field(default_factory=list)
    trace: Optional[list[TraceEvent]] = None
    resource_failure: bool = False

    def full_analyses(self, token_universe: frozenset[int]) -> list[Analysis]:
        return [a for a in self.analyses if a.coverage == token_universe]

    def edge_multisets(self, token_universe: frozenset[int]) -> set[frozenset]:
        """Comparable content: full-coverage analyses as sets of edge triples."""
        return {a.edge_set() for a in self.full_analyses(token_universe)}

    def to_dict(self) -> dict:
        doc = {
            "analyses": [a.to_dict() for a in self.analyses],
            "skipped": sorted(self.skipped),
            "complete": self.complete,
            "metrics": self.metrics.to_dict(),
        }
        if self.deferred:
            doc["deferred"] = [a.to_dict() for a in self.deferred]
        if self.resource_failure:
            doc["resource_failure"] = True
        return doc

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)


def sort_analyses(analyses: list[Analysis]) -> list[Analysis]:
    return sorted(analyses, key=lambda a: a.sort_key())


def dedupe_analyses(analyses: list[Analysis]) -> list[Analysis]:
    seen = set()
    unique = []
    for a in sort_analyses(analyses):
        key = (a.root, tuple(sorted(a.coverage)), a.edges, a.entry_classes)
        if key not in seen:
            seen.add(key)
            unique.append(a)
    return unique
