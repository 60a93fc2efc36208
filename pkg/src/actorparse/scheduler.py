"""Deterministic event scheduler.

Message sends are events on a priority queue keyed by a logical
timestamp. Events posted "concurrently" (same timestamp) are ordered by a
seed-keyed tie-break, so one seed fixes one total order, different seeds
exercise different interleavings, and replays are bit-stable across
processes. The tie-break uses ``random.Random`` (whose sequence is part
of Python's language spec) rather than ``hash`` so results do not depend
on PYTHONHASHSEED.
"""

from __future__ import annotations

import heapq
import random
from typing import Callable


class Scheduler:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self._queue: list[tuple[int, float, int, Callable[[], None]]] = []
        self._seq = 0
        self.now = 0

    def _tiebreak(self, seq: int) -> float:
        return random.Random((self.seed * 1_000_003) ^ seq).random()

    def post(self, thunk: Callable[[], None], delay: int = 1) -> None:
        """Schedule `thunk` at now+delay (same delay = concurrent batch)."""
        self._seq += 1
        heapq.heappush(
            self._queue, (self.now + delay, self._tiebreak(self._seq), self._seq, thunk)
        )

    def shuffled(self, items: list) -> list:
        """Seed-keyed stable shuffle for intra-episode fan-out order."""
        self._seq += 1
        rng = random.Random((self.seed * 7_368_787) ^ self._seq)
        out = list(items)
        rng.shuffle(out)
        return out

    def run_to_quiescence(self) -> None:
        while self._queue:
            time, _, _, thunk = heapq.heappop(self._queue)
            self.now = max(self.now, time)
            thunk()

    def pending(self) -> int:
        return len(self._queue)
