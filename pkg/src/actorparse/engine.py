"""The message-protocol dependency parsing engine.

Tokens are read left to right. Each token becomes the active container,
then a cascade of search protocols runs to quiescence before the next
token is read:

* searchPredictionFor — placeholder words in the immediately preceding
  container are filled by (or extended with) the new material.
* searchHeadFor — the active phrase offers itself as a modifier to the
  words on the right rim of the preceding container's phrases.
* searchModifierFor — tried only after searchHeadFor failed: the active
  phrase's root tries to take the preceding phrases' roots as modifiers.
* skip forwarding — on failure both searches are re-addressed to ever
  earlier containers (never across a barrier when barrier bounding is
  on); a success builds a discontinuous analysis and moves the skipped
  containers to the left of the new one, where they stay available.
* backtracking — when skipping is exhausted, reSearchHeadFor /
  reSearchModifierFor run against the historical predecessors of the
  containers on the chain (the head-centred parse history). A success
  supersedes the live analysis with a composite; tokens that fall out of
  it are re-exposed as fresh lexical containers and retry against the
  composite, which is how garden paths are repaired.

Attachment is non-destructive: both phrases are copied, so superseded
containers keep serving as backtrack targets unless memoization pruning
deleted them (the container holding the modifying part of every new
analysis is dropped from backtrack reachability, which is the sanctioned
source of incompleteness in restricted mode).

Exhaustive mode disables pruning, barriers and preference deferral, and
closes the search over every pair of compatible containers, yielding the
computationally complete analysis set (it matches the chart baseline).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .actors import ContainerActor, PhraseActor, WordActor, _fresh_wid
from .errors import (
    ActorParseError,
    KBError,
    ParseInputError,
    StaleOfferError,
    UnknownPredicateError,
)
from .features import FeatureStructure
from .grammar import Direction, Grammar, LexemeEntry, Slot, Valency, syntax_check
from .kb import KB, ContextStore, concept_check
from .metrics import MetricsRecord
from .results import (
    PUNCTUATION,
    Analysis,
    ParseResult,
    TraceEvent,
    dedupe_analyses,
    sort_analyses,
    universe,
)
from .scheduler import Scheduler

log = logging.getLogger(__name__)

HEAD_FOUND = "headFound"
MODIFIER_FOUND = "modifierFound"


class ParseTimeout(ActorParseError):
    pass


@dataclass
class ParseConfig:
    mode: str = "restricted"                 # "restricted" | "exhaustive"
    memoization_pruning: bool = True
    barrier_bounding: bool = True
    preference: str = "all-preferred"
    scheduler_seed: int = 0
    trace: bool = False
    max_phrases: int = 64
    timeout_s: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("restricted", "exhaustive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "exhaustive":
            # Completeness requires unrestricted memoization and access.
            self.memoization_pruning = False
            self.barrier_bounding = False


@dataclass(frozen=True)
class Offer:
    """One successful (syntaxCheck, conceptCheck) pair, ready to attach."""

    kind: str                       # HEAD_FOUND | MODIFIER_FOUND
    target_container: ContainerActor
    active_container: ContainerActor
    head_phrase: PhraseActor
    head_wid: int
    mod_phrase: PhraseActor
    valency: Valency
    ctx: str

    @property
    def head_position(self) -> float:
        pos = self.head_phrase.words[self.head_wid].position
        return float("inf") if pos is None else float(pos)


def _all_preferred(offers: list[Offer]) -> tuple[list[Offer], list[Offer]]:
    return list(offers), []


def _closest_attachment(offers: list[Offer]) -> tuple[list[Offer], list[Offer]]:
    best = max(o.head_position for o in offers)
    preferred = [o for o in offers if o.head_position == best]
    deferred = [o for o in offers if o.head_position != best]
    return preferred, deferred


PREFERENCE_PREDICATES: dict[str, Callable] = {
    "all-preferred": _all_preferred,
    "closest-attachment": _closest_attachment,
}


def split_by_preference(offers: list[Offer], predicate_id: str):
    """Partition offers into (preferred, deferred) by the named predicate."""
    if not offers:
        return [], []
    try:
        predicate = PREFERENCE_PREDICATES[predicate_id]
    except KeyError:
        raise UnknownPredicateError(f"unknown preference predicate {predicate_id!r}") from None
    return predicate(offers)


class Engine:
    """One parse run. Not reusable across sentences."""

    def __init__(self, grammar: Grammar, kb: KB, config: ParseConfig,
                 metrics: MetricsRecord | None = None,
                 store: ContextStore | None = None):
        self.g = grammar
        self.kb = kb
        self.cfg = config
        self.m = metrics if metrics is not None else MetricsRecord()
        self.store = store if store is not None else ContextStore(kb)
        self.sched = Scheduler(config.scheduler_seed)
        self.trace: list[TraceEvent] = []
        self.chain: list[ContainerActor] = []
        self.registry: list[ContainerActor] = []
        self.tokens: list[str] = []
        self._retry_done: set[tuple[int, int]] = set()
        self._seen_phrase_keys: set[tuple] = set()
        self._deadline: Optional[float] = None
        self._trace_seq = 0

    # -- shared plumbing -----------------------------------------------------

    def _check_deadline(self):
        if self._deadline is not None and time.monotonic() > self._deadline:
            raise ParseTimeout("per-sentence time budget exceeded")

    def _trace_evt(self, msg_type: str, frm, to, outcome: str):
        if self.cfg.trace:
            self._trace_seq += 1
            self.trace.append(
                TraceEvent(self._trace_seq, msg_type, str(frm), str(to), outcome)
            )

    def _validate(self, tokens: list[str]):
        if not tokens:
            raise ParseInputError("empty token list")
        for token in tokens:
            for entry in self.g.lookup(token):
                if entry.concept is not None and not self.kb.has_concept(entry.concept):
                    raise KBError(
                        f"lexeme {token!r} names concept {entry.concept!r} "
                        "that the KB does not declare"
                    )

    def _make_word(self, entry: LexemeEntry, pos: Optional[int]) -> WordActor:
        return WordActor(
            wid=_fresh_wid(),
            word_class=entry.word_class,
            position=pos,
            features=self.g.word_features(entry),
            frame=self.g.frame(entry.word_class),
            entry=entry,
        )

    def _lexical_container(self, pos: int, *, revived: bool = False) -> ContainerActor:
        token = self.tokens[pos]
        if token in PUNCTUATION:
            entry = self.g.unknown_entry(token)
            word = self._make_word(entry, pos)
            phrase = PhraseActor({word.wid: word}, word.wid, self.store.root)
            container = ContainerActor([phrase], is_barrier=True)
            self.registry.append(container)
            return container
        entries = self.g.lookup(token) or [self.g.unknown_entry(token)]
        phrases = []
        for entry in entries:
            word = self._make_word(entry, pos)
            ctx = self.store.clone(self.store.root)
            if entry.concept is not None:
                word.instance = self.store.assert_instance(ctx, entry.concept)
            phrase = PhraseActor({word.wid: word}, word.wid, ctx)
            phrases.append(phrase)
            phrases.extend(self._prediction_phrases(phrase))
        container = ContainerActor(phrases)
        container.revived = revived
        self.registry.append(container)
        return container

    def _prediction_phrases(self, base: PhraseActor) -> list[PhraseActor]:
        """Placeholder-augmented variants for a freshly instantiated word."""
        word = base.root
        results = []
        for pred in self.g.predictions(word.word_class):
            if pred.slot is Slot.HEAD:
                phrase = self._predict_head(base, pred.predicted_class)
            else:
                phrase = self._predict_modifier(base, pred.predicted_class)
            if phrase is not None:
                results.append(phrase)
        return results

    def _placeholder(self, word_class: str) -> WordActor:
        return WordActor(
            wid=_fresh_wid(),
            word_class=word_class,
            position=None,
            features=self.g.word_features(LexemeEntry("", word_class)),
            frame=(),
            entry=None,
            is_placeholder=True,
        )

    def _plausible_valencies(self, placeholder: WordActor, modifier: WordActor) -> list[Valency]:
        """Subclass valencies that would let `modifier` attach under the
        predicted word. Each candidate is a counted constraint check."""
        plausible: list[Valency] = []
        seen_labels = set(placeholder.filled)
        for cls in self.g.subclasses(placeholder.word_class):
            for v in self.g.frame(cls):
                if v.label in seen_labels:
                    continue
                if syntax_check(self.g, placeholder, modifier, v, self.m):
                    plausible.append(v)
                    seen_labels.add(v.label)
        return plausible

    def _predict_head(self, base: PhraseActor, predicted_class: str) -> Optional[PhraseActor]:
        phrase = base.copy()
        word = phrase.root
        placeholder = self._placeholder(predicted_class)
        plausible = self._plausible_valencies(placeholder, word)
        if not plausible:
            return None
        placeholder.frame = tuple(plausible)
        chosen = plausible[0]
        placeholder.filled[chosen.label] = word.wid
        word.head = (placeholder.wid, chosen.label)
        unified = word.features.unify(chosen.features)
        if unified is None:
            return None
        word.features = unified
        words = dict(phrase.words)
        words[placeholder.wid] = placeholder
        return PhraseActor(words, placeholder.wid, phrase.ctx)

    def _predict_modifier(self, base: PhraseActor, predicted_class: str) -> Optional[PhraseActor]:
        phrase = base.copy()
        word = phrase.root
        for v in word.open_valencies():
            if v.direction is not Direction.RIGHT:
                continue  # predictions anticipate material still to be read
            if not (
                self.g.subsumes(v.target, predicted_class)
                or self.g.subsumes(predicted_class, v.target)
            ):
                continue
            placeholder = self._placeholder(predicted_class)
            unified = placeholder.features.unify(v.features)
            if unified is None:
                continue
            placeholder.features = unified
            placeholder.head = (word.wid, v.label)
            word.filled[v.label] = placeholder.wid
            words = dict(phrase.words)
            words[placeholder.wid] = placeholder
            return PhraseActor(words, phrase.root_wid, phrase.ctx)
        return None

    # -- search episodes -------------------------------------------------------

    def _attachment_ctx(self, head_phrase, head_word, mod_phrase, mod_root, valency):
        """Merged interpretation context for a syntactically licensed pair,
        or None when the conceptual check rejects it."""
        if valency.role is None:
            return self.store.merge(head_phrase.ctx, mod_phrase.ctx)
        if head_word.instance is None or mod_root.instance is None:
            return None  # role demanded but a side has no interpretation
        merged = self.store.merge(head_phrase.ctx, mod_phrase.ctx)
        return concept_check(
            self.store, merged, head_word.instance, valency.role,
            mod_root.instance, self.m,
        )

    def _search_head_for(self, active: ContainerActor, target: ContainerActor,
                         msg="searchHeadFor", rim_filter=None) -> list[Offer]:
        """Active phrases request a head among the rim words of target phrases."""
        triples = []
        for ap in active.phrases:
            if ap.root.is_placeholder:
                continue
            for tp in target.phrases:
                rim = tp.right_rim()
                if rim_filter is not None:
                    rim = [w for w in rim if rim_filter(w)]
                for w in rim:
                    if w.is_placeholder:
                        continue
                    for v in w.open_valencies():
                        triples.append((ap, tp, w, v))
        offers = []
        for ap, tp, w, v in self.sched.shuffled(triples):
            mod_root = ap.root
            if not syntax_check(self.g, w, mod_root, v, self.m):
                continue
            ctx = self._attachment_ctx(tp, w, ap, mod_root, v)
            if ctx is None:
                continue
            offers.append(
                Offer(HEAD_FOUND, target, active, tp, w.wid, ap, v, ctx)
            )
            self._trace_evt(HEAD_FOUND, f"W{w.wid}", f"C{active.cid}", f"label:{v.label}")
        self._trace_evt(msg, f"C{active.cid}", f"C{target.cid}", f"offers:{len(offers)}")
        return offers

    def _search_modifier_for(self, active: ContainerActor, target: ContainerActor,
                             msg="searchModifierFor") -> list[Offer]:
        """Active phrase roots try to fill their open slots with target roots."""
        triples = []
        for ap in active.phrases:
            head = ap.root
            if head.is_placeholder:
                continue
            for v in head.open_valencies():
                for tp in target.phrases:
                    if tp.root.is_placeholder or tp.root.head is not None:
                        continue
                    triples.append((ap, head, v, tp))
        offers = []
        for ap, head, v, tp in self.sched.shuffled(triples):
            mod_root = tp.root
            if not syntax_check(self.g, head, mod_root, v, self.m):
                continue
            ctx = self._attachment_ctx(ap, head, tp, mod_root, v)
            if ctx is None:
                continue
            offers.append(
                Offer(MODIFIER_FOUND, target, active, ap, head.wid, tp, v, ctx)
            )
            self._trace_evt(MODIFIER_FOUND, f"W{head.wid}", f"C{active.cid}", f"label:{v.label}")
        self._trace_evt(msg, f"C{active.cid}", f"C{target.cid}", f"offers:{len(offers)}")
        return offers

    def _episode_pair(self, active, target, *, research=False, both=False):
        head_msg = "reSearchHeadFor" if research else "searchHeadFor"
        mod_msg = "reSearchModifierFor" if research else "searchModifierFor"
        offers = self._search_head_for(active, target, msg=head_msg)
        if offers and not both:
            return offers
        return offers + self._search_modifier_for(active, target, msg=mod_msg)

    # -- attachment ------------------------------------------------------------

    def _build_attachment(self, offer: Offer) -> PhraseActor:
        head_phrase = offer.head_phrase.copy()
        mod_phrase = offer.mod_phrase.copy()
        words = {**head_phrase.words, **mod_phrase.words}
        head_w = words[offer.head_wid]
        mod_root = words[offer.mod_phrase.root_wid]
        head_w.filled[offer.valency.label] = mod_root.wid
        mod_root.head = (head_w.wid, offer.valency.label)
        unified = mod_root.features.unify(offer.valency.features)
        if unified is not None:
            mod_root.features = unified
        return PhraseActor(words, head_phrase.root_wid, offer.ctx)

    def attach(self, offers: list[Offer]):
        """Build the successor container for one search episode's offers.

        Raises StaleOfferError when an offer's source containers were
        already superseded (possible when offers are replayed externally).
        """
        if not offers:
            raise ValueError("attach needs at least one offer")
        for o in offers:
            for c in (o.active_container, o.target_container):
                if c.superseded or c not in self.chain:
                    raise StaleOfferError(f"container C{c.cid} superseded")
        return self._attach(
            offers,
            live_target=offers[0].target_container,
            live_active=offers[0].active_container,
        )

    def _attach(self, offers: list[Offer], *, live_target: ContainerActor,
                live_active: ContainerActor) -> Optional[ContainerActor]:
        preferred, deferred = split_by_preference(offers, self.cfg.preference)
        if len(preferred) > self.cfg.max_phrases:
            log.warning(
                "ambiguity cap: dropping %d of %d attachment offers",
                len(preferred) - self.cfg.max_phrases, len(preferred),
            )
            preferred = preferred[: self.cfg.max_phrases]
        phrases = []
        seen = set()
        for o in preferred:
            phrase = self._build_attachment(o)
            key = phrase.analysis_key()
            if key not in seen:
                seen.add(key)
                phrases.append(phrase)
        if not phrases:
            return None

        sample = preferred[0]
        head_portion = (
            sample.target_container if sample.kind == HEAD_FOUND
            else sample.active_container
        )
        modifier_portion = (
            sample.active_container if sample.kind == HEAD_FOUND
            else sample.target_container
        )

        container = ContainerActor(phrases, historical_pred=head_portion)
        self.registry.append(container)
        if deferred:
            deferred_phrases = []
            dseen = set()
            for o in deferred:
                phrase = self._build_attachment(o)
                key = phrase.analysis_key()
                if key not in dseen:
                    dseen.add(key)
                    deferred_phrases.append(phrase)
            container.deferred = ContainerActor(deferred_phrases)
            container.deferred.superseded = True
            self.registry.append(container.deferred)
            self._trace_evt("defer", f"C{container.cid}",
                            f"C{container.deferred.cid}", f"deferred:{len(deferred_phrases)}")

        if self.cfg.memoization_pruning:
            modifier_portion.pruned = True

        # chain surgery
        target_idx = self.chain.index(live_target)
        active_idx = self.chain.index(live_active)
        leftward_search = active_idx > target_idx  # cascade/backtrack, not a retry
        left_idx, right_idx = sorted((target_idx, active_idx))
        between = self.chain[left_idx + 1 : right_idx]
        leftover = live_target.coverage - (
            offers[0].target_container.coverage | offers[0].active_container.coverage
        )
        revived = [self._lexical_container(pos, revived=True) for pos in sorted(leftover)]
        live_active.superseded = True
        live_target.superseded = True
        if leftward_search:
            # everything the search was forwarded across counts as skipped
            for c in between:
                if not c.is_barrier:
                    c.skip_marked = True
        self.chain = self.chain[:left_idx] + revived + between + [container]
        self._relink()
        self._trace_evt(
            "attach", f"C{live_active.cid}", f"C{container.cid}",
            f"phrases:{len(phrases)}",
        )

        # the new container continues the cascade, skipped material retries
        self.sched.post(lambda: self._cascade(container, token_active=False))
        self._post_retries(container)
        return container

    def _relink(self):
        prev = None
        for c in self.chain:
            c.textual_pred = prev
            prev = c

    def _post_retries(self, new_container: ContainerActor):
        candidates = [
            c for c in self.chain
            if c is not new_container and (c.skip_marked or c.revived)
            and not c.is_barrier
        ]
        for c in reversed(candidates):  # rightmost first
            key = (c.cid, new_container.cid)
            if key in self._retry_done:
                continue
            self._retry_done.add(key)
            self.sched.post(
                lambda c=c, n=new_container: self._retry(c, n)
            )

    def _retry(self, skipped: ContainerActor, target: ContainerActor):
        """A skipped container re-addresses its searches to the new container."""
        if skipped.superseded or target.superseded:
            return
        self._check_deadline()
        offers = self._episode_pair(skipped, target, research=True)
        if offers:
            self._attach(offers, live_target=target, live_active=skipped)

    # -- prediction step ---------------------------------------------------------

    def _prediction_step(self, active: ContainerActor, target: ContainerActor) -> bool:
        offers: list[tuple] = []
        for tp in target.phrases:
            if not tp.has_placeholder():
                continue
            for ph in tp.placeholders():
                for ap in active.phrases:
                    if ap.root.is_placeholder:
                        continue
                    built = self._try_fill(tp, ph, ap) or self._try_extend(tp, ph, ap)
                    if built is not None:
                        offers.append(built)
        self._trace_evt(
            "searchPredictionFor", f"C{active.cid}", f"C{target.cid}",
            f"offers:{len(offers)}",
        )
        if not offers:
            return False
        phrases = []
        seen = set()
        for phrase in offers:
            key = phrase.analysis_key()
            if key not in seen:
                seen.add(key)
                phrases.append(phrase)
        container = ContainerActor(phrases, historical_pred=target)
        self.registry.append(container)
        if self.cfg.memoization_pruning:
            active.pruned = True
        left_idx = self.chain.index(target)
        self.chain = self.chain[:left_idx] + [container]
        target.superseded = True
        active.superseded = True
        self._relink()
        self._trace_evt("predictionFound", f"C{target.cid}", f"C{container.cid}",
                        f"phrases:{len(phrases)}")
        self.sched.post(lambda: self._cascade(container, token_active=False))
        self._post_retries(container)
        return True

    def _try_fill(self, tp: PhraseActor, ph: WordActor, ap: PhraseActor) -> Optional[PhraseActor]:
        actual = ap.root
        if not self.g.subsumes(ph.word_class, actual.word_class):
            return None
        unified = ph.features.unify(actual.features)
        if unified is None:
            return None
        frame = {v.label: v for v in self.g.frame(actual.word_class)}
        target_phrase = tp.copy()
        mod_phrase = ap.copy()
        words = {**target_phrase.words, **mod_phrase.words}
        ph_copy = words.pop(ph.wid)
        actual_copy = words[actual.wid]
        # carried modifiers must stay licensed on the actual word's own frame
        for label, mwid in ph_copy.filled.items():
            v = frame.get(label)
            if v is None or label in actual_copy.filled:
                return None
            mod = words[mwid]
            if not self.g.subsumes(v.target, mod.word_class):
                return None
            if mod.features.unify(v.features) is None:
                return None
            if not _side_ok(actual_copy.position, mod.position, v.direction):
                return None
        ctx = self.store.merge(target_phrase.ctx, mod_phrase.ctx)
        for label, mwid in ph_copy.filled.items():
            v = frame[label]
            if v.role is None:
                continue
            mod = words[mwid]
            if actual_copy.instance is None or mod.instance is None:
                return None
            child = concept_check(
                self.store, ctx, actual_copy.instance, v.role, mod.instance, self.m
            )
            if child is None:
                return None
            ctx = child
        actual_copy.features = unified
        actual_copy.filled.update(ph_copy.filled)
        actual_copy.head = ph_copy.head
        for w in words.values():
            if w.head is not None and w.head[0] == ph.wid:
                w.head = (actual.wid, w.head[1])
            for label, mwid in list(w.filled.items()):
                if mwid == ph.wid:
                    w.filled[label] = actual.wid
        root = actual.wid if tp.root_wid == ph.wid else tp.root_wid
        return PhraseActor(words, root, ctx)

    def _try_extend(self, tp: PhraseActor, ph: WordActor, ap: PhraseActor) -> Optional[PhraseActor]:
        """Attach the active root as a further modifier of the placeholder."""
        actual = ap.root
        plausible = self._plausible_valencies(ph, actual)
        if not plausible:
            return None
        target_phrase = tp.copy()
        mod_phrase = ap.copy()
        words = {**target_phrase.words, **mod_phrase.words}
        ph_copy = words[ph.wid]
        actual_copy = words[actual.wid]
        ph_copy.frame = tuple(list(ph_copy.frame) + [
            v for v in plausible if all(v.label != e.label for e in ph_copy.frame)
        ])
        chosen = plausible[0]
        ph_copy.filled[chosen.label] = actual_copy.wid
        actual_copy.head = (ph_copy.wid, chosen.label)
        unified = actual_copy.features.unify(chosen.features)
        if unified is not None:
            actual_copy.features = unified
        ctx = self.store.merge(target_phrase.ctx, mod_phrase.ctx)
        return PhraseActor(words, target_phrase.root_wid, ctx)

    # -- the protocol cascade ------------------------------------------------------

    def _cascade(self, active: ContainerActor, *, token_active: bool):
        if active.superseded or active.is_barrier:
            return
        self._check_deadline()
        first_target = active.textual_pred
        if first_target is None:
            return
        if any(tp.has_placeholder() for tp in first_target.phrases):
            if self._prediction_step(active, first_target):
                return
        target = first_target
        while target is not None:
            offers = self._episode_pair(active, target)
            if offers:
                self._attach(offers, live_target=target, live_active=active)
                return
            if target is first_target and any(
                ap.has_placeholder() for ap in active.phrases
            ):
                # the active word predicts its own integration; wait for it
                self._trace_evt("proceedPredicted", f"C{active.cid}", f"C{active.cid}", "wait")
                return
            if self.cfg.barrier_bounding and target.is_barrier:
                break  # searches may not be forwarded across a barrier
            target = target.textual_pred
            if target is not None:
                self._trace_evt("skipForward", f"C{active.cid}", f"C{target.cid}", "forwarded")
        if not token_active:
            return
        self._backtrack(active)

    def _backtrack(self, active: ContainerActor):
        self.m.count_backtrack()
        self._trace_evt("backtrack", f"C{active.cid}", "-", "started")
        current = active.textual_pred
        while current is not None:
            if self.cfg.barrier_bounding and current.is_barrier:
                break
            candidates: list[ContainerActor] = []
            if current.deferred is not None:
                candidates.append(current.deferred)
            for hist in current.historical_chain():
                candidates.append(hist)
                if hist.deferred is not None:
                    candidates.append(hist.deferred)
            for target in candidates:
                offers = self._episode_pair(active, target, research=True)
                if offers:
                    self._attach(offers, live_target=current, live_active=active)
                    return
            current = current.textual_pred
        self._trace_evt("backtrack", f"C{active.cid}", "-", "failed")

    # -- drivers -------------------------------------------------------------------

    def parse(self, tokens: list[str]) -> ParseResult:
        self._validate(tokens)
        self.tokens = list(tokens)
        if self.cfg.timeout_s is not None:
            self._deadline = time.monotonic() + self.cfg.timeout_s
        if self.cfg.mode == "exhaustive":
            return self._parse_exhaustive()
        return self._parse_restricted()

    def _parse_restricted(self) -> ParseResult:
        for pos in range(len(self.tokens)):
            self._check_deadline()
            container = self._lexical_container(pos)
            self.chain.append(container)
            self._relink()
            if not container.is_barrier:
                self.sched.post(
                    lambda c=container: self._cascade(c, token_active=True)
                )
            self.sched.run_to_quiescence()
        return self._finalize_restricted()

    def _finalize_restricted(self) -> ParseResult:
        token_universe = universe(self.tokens)
        live = [c for c in self.chain if not c.is_barrier]
        main = None
        for c in live:  # rightmost wins ties
            if main is None or len(c.coverage) >= len(main.coverage):
                main = c
        analyses = []
        if main is not None:
            analyses = [
                self._to_analysis(p) for p in main.phrases if not p.has_placeholder()
            ]
        skipped = frozenset()
        for c in live:
            if c is main or not c.skip_marked:
                continue
            skipped |= c.coverage & token_universe
        covered = main.coverage if main is not None else frozenset()
        complete = bool(analyses) and (covered | skipped) >= token_universe
        deferred = []
        for c in live:
            if c.deferred is not None:
                deferred.extend(
                    self._to_analysis(p) for p in c.deferred.phrases
                    if not p.has_placeholder()
                )
        return self._make_result(analyses, skipped, complete, deferred)

    def _parse_exhaustive(self) -> ParseResult:
        containers: list[ContainerActor] = []
        for pos in range(len(self.tokens)):
            self._check_deadline()
            container = self._lexical_container(pos)
            self.chain.append(container)
            self._relink()
            if container.is_barrier:
                continue
            for p in container.phrases:
                self._seen_phrase_keys.add(p.analysis_key())
            for other in containers:
                self._post_pair(container, other)
                self._post_pair(other, container)
            containers.append(container)
        self._exhaustive_containers = containers
        self.sched.run_to_quiescence()
        return self._finalize_exhaustive()

    def _post_pair(self, active: ContainerActor, target: ContainerActor):
        self.sched.post(lambda a=active, t=target: self._pair_episode(a, t))

    def _pair_episode(self, active: ContainerActor, target: ContainerActor):
        if active.coverage & target.coverage:
            return
        self._check_deadline()
        offers = self._episode_pair(active, target, both=True)
        if not offers:
            return
        phrases = []
        for o in offers:
            phrase = self._build_attachment(o)
            key = phrase.analysis_key()
            if key in self._seen_phrase_keys:
                continue
            self._seen_phrase_keys.add(key)
            phrases.append(phrase)
        if not phrases:
            return
        container = ContainerActor(phrases, historical_pred=target)
        self.registry.append(container)
        self._trace_evt("attach", f"C{active.cid}", f"C{container.cid}",
                        f"phrases:{len(phrases)}")
        for other in self._exhaustive_containers:
            if other.coverage & container.coverage:
                continue
            self._post_pair(container, other)
            self._post_pair(other, container)
        self._exhaustive_containers.append(container)

    def _finalize_exhaustive(self) -> ParseResult:
        token_universe = universe(self.tokens)
        best_cov: frozenset[int] = frozenset()
        for c in self._exhaustive_containers:
            if (len(c.coverage), sorted(c.coverage)) > (len(best_cov), sorted(best_cov)):
                best_cov = c.coverage
        analyses = []
        for c in self._exhaustive_containers:
            if c.coverage != best_cov:
                continue
            analyses.extend(
                self._to_analysis(p) for p in c.phrases if not p.has_placeholder()
            )
        skipped = token_universe - best_cov if analyses else frozenset()
        complete = bool(analyses) and best_cov == token_universe
        return self._make_result(analyses, skipped, complete, [])

    def _to_analysis(self, phrase: PhraseActor) -> Analysis:
        root = phrase.root.position
        return Analysis(
            root=root if root is not None else -1,
            coverage=phrase.coverage,
            edges=tuple(phrase.edge_triples()),
            interpretation=self.store.extract(phrase.ctx),
            entry_classes=tuple(
                (w.position, w.word_class)
                for w in sorted(phrase.words.values(), key=lambda w: w.sort_position())
                if w.position is not None
            ),
        )

    def _make_result(self, analyses, skipped, complete, deferred) -> ParseResult:
        analyses = dedupe_analyses(analyses)
        deferred = dedupe_analyses(deferred)
        self.m.skipped_tokens = len(skipped)
        self.m.complete = complete
        return ParseResult(
            analyses=analyses,
            skipped=frozenset(skipped),
            complete=complete,
            metrics=self.m,
            deferred=deferred,
            trace=self.trace if self.cfg.trace else None,
        )


def _side_ok(head_pos, mod_pos, direction: Direction) -> bool:
    if head_pos is None and mod_pos is None:
        return False
    if direction is Direction.LEFT:
        return head_pos is None or (mod_pos is not None and mod_pos < head_pos)
    return mod_pos is None or (head_pos is not None and mod_pos > head_pos)


def parse(tokens: list[str], grammar: Grammar, kb: KB,
          config: ParseConfig | None = None,
          metrics: MetricsRecord | None = None) -> ParseResult:
    """Parse one sentence with the message-protocol engine."""
    cfg = config if config is not None else ParseConfig()
    return Engine(grammar, kb, cfg, metrics).parse(tokens)
