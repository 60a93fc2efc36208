"""Word, phrase and container actors.

Three granularities of parsing state:

* WordActor — one lexical reading at one token position, with its valency
  fill state and an optional KB instance. Placeholder word actors stand
  in for predicted, not-yet-read words (position None, counts as
  rightmost).
* PhraseActor — a dependency tree over word actors plus the context that
  interprets exactly the relations established in it.
* ContainerActor — alternative phrase analyses over one token span, with
  the textual (surface order) and historical (parse history) links the
  protocols navigate.

Protocol steps never mutate existing phrases; attachment copies both
sides first. Word ids (and KB instance ids) are stable across copies so
analyses built from the same lexical instantiation stay comparable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .features import FeatureStructure
from .grammar import Grammar, LexemeEntry, Valency
from .kb import InstanceRef

_wid_counter = itertools.count()
_pid_counter = itertools.count()
_cid_counter = itertools.count()


def _fresh_wid() -> int:
    return next(_wid_counter)


@dataclass
class WordActor:
    wid: int
    word_class: str
    position: Optional[int]                # None for placeholders
    features: FeatureStructure
    frame: tuple[Valency, ...]
    entry: Optional[LexemeEntry] = None    # None for placeholders
    filled: dict[str, int] = field(default_factory=dict)   # label -> modifier wid
    head: Optional[tuple[int, str]] = None                 # (head wid, label)
    instance: Optional[InstanceRef] = None
    is_placeholder: bool = False

    def copy(self) -> "WordActor":
        return WordActor(
            wid=self.wid,
            word_class=self.word_class,
            position=self.position,
            features=self.features,
            frame=self.frame,
            entry=self.entry,
            filled=dict(self.filled),
            head=self.head,
            instance=self.instance,
            is_placeholder=self.is_placeholder,
        )

    def open_valencies(self) -> list[Valency]:
        return [v for v in self.frame if v.label not in self.filled]

    @property
    def surface(self) -> str:
        if self.entry is not None:
            return self.entry.surface
        return f"<{self.word_class}>"

    def sort_position(self) -> float:
        return float("inf") if self.position is None else self.position

    def __repr__(self) -> str:
        return f"W{self.wid}:{self.surface}@{self.position}"


class PhraseActor:
    """One dependency analysis: a tree of word actors plus its context."""

    def __init__(self, words: dict[int, WordActor], root_wid: int, ctx: str):
        self.pid = next(_pid_counter)
        self.words = words
        self.root_wid = root_wid
        self.ctx = ctx

    @property
    def root(self) -> WordActor:
        return self.words[self.root_wid]

    @property
    def coverage(self) -> frozenset[int]:
        return frozenset(
            w.position for w in self.words.values() if w.position is not None
        )

    def copy(self) -> "PhraseActor":
        return PhraseActor(
            words={wid: w.copy() for wid, w in self.words.items()},
            root_wid=self.root_wid,
            ctx=self.ctx,
        )

    def edges(self) -> list[tuple[int, int, str]]:
        """(head wid, modifier wid, label) for every established relation."""
        result = []
        for w in self.words.values():
            if w.head is not None:
                hwid, label = w.head
                result.append((hwid, w.wid, label))
        return result

    def edge_triples(self) -> list[tuple[int, int, str]]:
        """(head position, modifier position, label), sorted. Placeholders excluded."""
        triples = []
        for hwid, mwid, label in self.edges():
            hpos = self.words[hwid].position
            mpos = self.words[mwid].position
            if hpos is not None and mpos is not None:
                triples.append((hpos, mpos, label))
        return sorted(triples)

    def entry_signature(self) -> tuple:
        """Which reading each covered position uses; placeholders listed by class."""
        sig = []
        for w in sorted(self.words.values(), key=lambda w: w.sort_position()):
            if w.is_placeholder:
                sig.append((None, w.word_class))
            else:
                sig.append((w.position, w.entry.word_class, id(w.entry)))
        return tuple(sig)

    def analysis_key(self) -> tuple:
        """Identity of the analysis: edges plus the readings it is built from."""
        return (tuple(self.edge_triples()), self.entry_signature(), self.root.position)

    def has_placeholder(self) -> bool:
        return any(w.is_placeholder for w in self.words.values())

    def placeholders(self) -> list[WordActor]:
        return [w for w in self.words.values() if w.is_placeholder]

    def right_rim(self) -> list[WordActor]:
        """Chain from the root following, at each node, the attached modifier
        with the greatest position."""
        rim = []
        current = self.root
        while True:
            rim.append(current)
            if not current.filled:
                return rim
            modifiers = [self.words[wid] for wid in current.filled.values()]
            current = max(modifiers, key=lambda w: w.sort_position())

    def tree_ok(self) -> bool:
        """Single tree rooted at root_wid: every non-root has exactly one head,
        every head link points inside the phrase, no cycles."""
        seen = set()
        for w in self.words.values():
            if w.wid == self.root_wid:
                if w.head is not None:
                    return False
                continue
            if w.head is None:
                return False
            hwid, label = w.head
            if hwid not in self.words:
                return False
            if self.words[hwid].filled.get(label) != w.wid:
                return False
        # walk up from every node; must reach root without repeats
        for w in self.words.values():
            trail = set()
            node = w
            while node.head is not None:
                if node.wid in trail:
                    return False
                trail.add(node.wid)
                node = self.words[node.head[0]]
            if node.wid != self.root_wid:
                return False
        return True

    def __repr__(self) -> str:
        toks = " ".join(
            w.surface
            for w in sorted(self.words.values(), key=lambda w: w.sort_position())
        )
        return f"P{self.pid}[{toks}]"


class ContainerActor:
    """Alternative phrase analyses over the same token span."""

    def __init__(
        self,
        phrases: list[PhraseActor],
        *,
        is_barrier: bool = False,
        textual_pred: Optional["ContainerActor"] = None,
        historical_pred: Optional["ContainerActor"] = None,
    ):
        if not phrases:
            raise ValueError("a container must hold at least one phrase")
        coverages = {p.coverage for p in phrases}
        if len(coverages) != 1:
            raise ValueError(f"container phrases must share coverage, got {coverages}")
        self.cid = next(_cid_counter)
        self.phrases = phrases
        self.is_barrier = is_barrier
        self.textual_pred = textual_pred
        self.historical_pred = historical_pred
        self.deferred: Optional[ContainerActor] = None
        self.pruned = False        # removed from backtrack reachability
        self.superseded = False    # no longer on the live textual chain
        self.skip_marked = False   # successfully skipped over at least once
        self.revived = False       # re-exposed by a backtracking reanalysis

    @property
    def coverage(self) -> frozenset[int]:
        return self.phrases[0].coverage

    def rightmost(self) -> int:
        return max(self.coverage) if self.coverage else -1

    def historical_chain(self) -> list["ContainerActor"]:
        """Backtracking targets reachable from this container's history."""
        chain = []
        node = self.historical_pred
        while node is not None:
            if not node.pruned:
                chain.append(node)
            node = node.historical_pred
        return chain

    def snapshot(self) -> tuple:
        """Serialized content, used to assert non-destructiveness."""
        return tuple(
            sorted(
                (p.analysis_key(), p.ctx, tuple(sorted(p.words[p.root_wid].filled.items())))
                for p in self.phrases
            )
        )

    def __repr__(self) -> str:
        cov = ",".join(str(i) for i in sorted(self.coverage))
        return f"C{self.cid}[{cov}]"
