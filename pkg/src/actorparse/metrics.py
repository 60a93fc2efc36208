"""Instrumentation counters shared by both parsing strategies.

One record is owned by one (sentence, system) run. Increments are guarded
by a lock so a record can be handed to worker threads; within the
deterministic single-threaded engines the lock is uncontended.
"""

from __future__ import annotations

import threading


class MetricsRecord:
    """Counters for constraint-check executions and parse outcome flags."""

    __slots__ = (
        "_lock",
        "syntax_checks",
        "concept_checks",
        "anaphora_concept_checks",
        "backtrack_events",
        "skipped_tokens",
        "wall_ms",
        "complete",
    )

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.syntax_checks = 0
        self.concept_checks = 0
        self.anaphora_concept_checks = 0
        self.backtrack_events = 0
        self.skipped_tokens = 0
        self.wall_ms = 0
        self.complete = False

    def count_syntax_check(self) -> None:
        with self._lock:
            self.syntax_checks += 1

    def count_concept_check(self, anaphora: bool = False) -> None:
        with self._lock:
            self.concept_checks += 1
            if anaphora:
                self.anaphora_concept_checks += 1

    def count_backtrack(self) -> None:
        with self._lock:
            self.backtrack_events += 1

    def to_dict(self) -> dict:
        return {
            "syntax_checks": self.syntax_checks,
            "concept_checks": self.concept_checks,
            "anaphora_concept_checks": self.anaphora_concept_checks,
            "backtrack_events": self.backtrack_events,
            "skipped_tokens": self.skipped_tokens,
            "wall_ms": self.wall_ms,
            "complete": self.complete,
        }

    def add(self, other: "MetricsRecord") -> None:
        """Accumulate another record into this one (report totals)."""
        with self._lock:
            self.syntax_checks += other.syntax_checks
            self.concept_checks += other.concept_checks
            self.anaphora_concept_checks += other.anaphora_concept_checks
            self.backtrack_events += other.backtrack_events
            self.skipped_tokens += other.skipped_tokens
            self.wall_ms += other.wall_ms

    def __repr__(self) -> str:
        return (
            f"MetricsRecord(syn={self.syntax_checks}, con={self.concept_checks}, "
            f"back={self.backtrack_events}, skip={self.skipped_tokens}, "
            f"complete={self.complete})"
        )
