"""Minimal terminological knowledge base with clonable contexts.

The KB schema (concept taxonomy plus role definitions) is immutable after
loading. All assertional state lives in a ContextStore: a tree of
interpretation contexts, each holding its own instances and role
assertions on top of everything visible from its parent. Cloning a
context is cheap (copy-on-write through the parent chain); parents are
never mutated once they have children.

The same role name may be declared several times with different
domain/range pairs; a role-filling check succeeds if any declaration
admits the (head concept, filler concept) pair. Assertions record the
role name only, so interpretation variants that fill the "same" slot on
different subjects differ in nothing but the assertion's subject.

KB file format (JSON)::

    {"concepts": [{"name": "PRINTER", "parents": ["PRODUCT"]}, ...],
     "roles": [{"name": "price", "domain": "PRODUCT", "range": "MONEY"}, ...]}

Concepts without parents hang off the implicit root THING.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import (
    DanglingInstanceError,
    KBError,
    UnknownConceptError,
    UnknownContextError,
    UnknownRoleError,
)
from .grammar import _read_json

ROOT_CONCEPT = "THING"


@dataclass(frozen=True)
class RoleDef:
    name: str
    domain: str
    range: str


@dataclass(frozen=True)
class InstanceRef:
    """A discourse referent: an instance id anchored in a context."""

    id: str
    context: str


@dataclass(frozen=True)
class RoleAssertion:
    subject: str
    role: str
    filler: str


class KB:
    """Immutable concept taxonomy plus role declarations."""

    def __init__(self, parents: dict[str, list[str]], roles: Iterable[RoleDef]):
        self.parents: dict[str, list[str]] = {ROOT_CONCEPT: []}
        for name, ps in parents.items():
            if name == ROOT_CONCEPT:
                continue
            self.parents[name] = list(ps) if ps else [ROOT_CONCEPT]
        for name, ps in self.parents.items():
            for p in ps:
                if p not in self.parents:
                    raise KBError(f"concept {name!r} names undeclared parent {p!r}")
        self._ancestors = self._compute_ancestors()
        self.roles: dict[str, list[RoleDef]] = {}
        for role in roles:
            if role.domain not in self.parents:
                raise KBError(f"role {role.name!r} has undeclared domain {role.domain!r}")
            if role.range not in self.parents:
                raise KBError(f"role {role.name!r} has undeclared range {role.range!r}")
            self.roles.setdefault(role.name, []).append(role)

    def _compute_ancestors(self) -> dict[str, frozenset[str]]:
        ancestors: dict[str, frozenset[str]] = {}

        def visit(name: str, trail: tuple[str, ...]) -> frozenset[str]:
            if name in trail:
                raise KBError(f"taxonomy contains a cycle through {name!r}")
            cached = ancestors.get(name)
            if cached is not None:
                return cached
            acc = {name}
            for p in self.parents[name]:
                acc |= visit(p, trail + (name,))
            result = frozenset(acc)
            ancestors[name] = result
            return result

        for name in self.parents:
            visit(name, ())
        return ancestors

    def has_concept(self, name: str) -> bool:
        return name in self.parents

    def subsumes(self, general: str, specific: str) -> bool:
        """True iff every `specific` is a `general` (or they are equal)."""
        if general not in self.parents:
            raise UnknownConceptError(f"unknown concept {general!r}")
        if specific not in self.parents:
            raise UnknownConceptError(f"unknown concept {specific!r}")
        return general in self._ancestors[specific]

    def role_defs(self, name: str) -> list[RoleDef]:
        try:
            return self.roles[name]
        except KeyError:
            raise UnknownRoleError(f"unknown role {name!r}") from None

    def role_admits(self, name: str, head_concept: str, filler_concept: str) -> bool:
        return any(
            self.subsumes(d.domain, head_concept) and self.subsumes(d.range, filler_concept)
            for d in self.role_defs(name)
        )


def subsumes(kb: KB, general: str, specific: str) -> bool:
    return kb.subsumes(general, specific)


def load_kb(source) -> KB:
    doc = _read_json(source, KBError)
    if not isinstance(doc, dict):
        raise KBError("kb document must be a JSON object")
    parents: dict[str, list[str]] = {}
    for raw in doc.get("concepts", []):
        try:
            parents[raw["name"]] = list(raw.get("parents", []))
        except KeyError as exc:
            raise KBError(f"concept definition missing key {exc}") from None
    roles = []
    for raw in doc.get("roles", []):
        try:
            roles.append(RoleDef(name=raw["name"], domain=raw["domain"], range=raw["range"]))
        except KeyError as exc:
            raise KBError(f"role definition missing key {exc}") from None
    return KB(parents, roles)


@dataclass
class Interpretation:
    """Everything visible from one context, deterministically ordered."""

    instances: list[tuple[str, str]]          # (instance id, concept)
    assertions: list[tuple[str, str, str]]    # (subject, role, filler)

    def to_dict(self) -> dict:
        return {
            "instances": [{"instance": i, "concept": c} for i, c in self.instances],
            "assertions": [
                {"subject": s, "role": r, "filler": f} for s, r, f in self.assertions
            ],
        }

    def signature(self) -> tuple:
        return (tuple(self.instances), tuple(sorted(self.assertions)))


class _Ctx:
    __slots__ = ("parent", "instances", "assertions")

    def __init__(self, parent: Optional[str]):
        self.parent = parent
        self.instances: dict[str, str] = {}
        self.assertions: list[RoleAssertion] = []


class ContextStore:
    """Per-parse tree of interpretation contexts over a shared KB schema."""

    def __init__(self, kb: KB):
        self.kb = kb
        self._lock = threading.Lock()
        self._contexts: dict[str, _Ctx] = {}
        self._instance_concepts: dict[str, str] = {}
        self._next_ctx = 0
        self._next_instance = 0
        self.root = self._new_ctx(None)

    def _new_ctx(self, parent: Optional[str]) -> str:
        with self._lock:
            cid = f"c{self._next_ctx}"
            self._next_ctx += 1
        self._contexts[cid] = _Ctx(parent)
        return cid

    def _get(self, ctx: str) -> _Ctx:
        try:
            return self._contexts[ctx]
        except KeyError:
            raise UnknownContextError(f"unknown context {ctx!r}") from None

    def _chain(self, ctx: str):
        current: Optional[str] = ctx
        while current is not None:
            node = self._get(current)
            yield node
            current = node.parent

    # -- operations ---------------------------------------------------------

    def clone(self, ctx: str) -> str:
        """New child context; later writes to it never touch `ctx`."""
        self._get(ctx)
        return self._new_ctx(ctx)

    def assert_instance(self, ctx: str, concept: str) -> InstanceRef:
        if not self.kb.has_concept(concept):
            raise UnknownConceptError(f"unknown concept {concept!r}")
        with self._lock:
            iid = f"i{self._next_instance}"
            self._next_instance += 1
        self._get(ctx).instances[iid] = concept
        self._instance_concepts[iid] = concept
        return InstanceRef(id=iid, context=ctx)

    def concept_of(self, ctx: str, instance: str) -> str:
        for node in self._chain(ctx):
            concept = node.instances.get(instance)
            if concept is not None:
                return concept
        raise DanglingInstanceError(f"instance {instance!r} not visible from {ctx!r}")

    def visible_instances(self, ctx: str) -> dict[str, str]:
        merged: dict[str, str] = {}
        for node in self._chain(ctx):
            for iid, concept in node.instances.items():
                merged.setdefault(iid, concept)
        return merged

    def visible_assertions(self, ctx: str) -> list[RoleAssertion]:
        chains = list(self._chain(ctx))
        merged: list[RoleAssertion] = []
        for node in reversed(chains):  # oldest first
            merged.extend(node.assertions)
        return merged

    def merge(self, base: str, other: str) -> str:
        """Child of `base` importing everything visible from `other`.

        Used when two phrases join: the head phrase's interpretation is the
        parent (cheap copy-on-write), the modifier side's content is copied
        in.
        """
        child = self.clone(base)
        node = self._contexts[child]
        node.instances.update(self.visible_instances(other))
        node.assertions.extend(self.visible_assertions(other))
        return child

    def add_assertion(self, ctx: str, subject: str, role: str, filler: str) -> None:
        self.kb.role_defs(role)
        node = self._get(ctx)
        node.assertions.append(RoleAssertion(subject, role, filler))

    def extract(self, ctx: str) -> Interpretation:
        instances = sorted(
            self.visible_instances(ctx).items(), key=lambda kv: _instance_key(kv[0])
        )
        assertions = [
            (a.subject, a.role, a.filler) for a in self.visible_assertions(ctx)
        ]
        return Interpretation(instances=instances, assertions=assertions)

    def substitute(self, ctx: str, old: str, new: str) -> str:
        """Fresh context in which `new` replaces `old` everywhere.

        The replacement instance is registered in the result (with its
        concept looked up globally), the replaced instance is removed, and
        every assertion mentioning it is rewritten. Assertion count is
        preserved. The source context is left untouched.
        """
        visible = self.visible_instances(ctx)
        if old not in visible:
            raise DanglingInstanceError(f"instance {old!r} not visible from {ctx!r}")
        new_concept = self._instance_concepts.get(new)
        if new_concept is None:
            raise DanglingInstanceError(f"unknown instance {new!r}")
        result = self._new_ctx(None)
        node = self._contexts[result]
        for iid, concept in visible.items():
            if iid != old:
                node.instances[iid] = concept
        node.instances.setdefault(new, new_concept)
        swap = lambda x: new if x == old else x
        node.assertions = [
            RoleAssertion(swap(a.subject), a.role, swap(a.filler))
            for a in self.visible_assertions(ctx)
        ]
        return result


def _instance_key(iid: str) -> tuple:
    digits = iid[1:]
    return (0, int(digits)) if digits.isdigit() else (1, iid)


def clone_context(store: ContextStore, ctx: str) -> str:
    return store.clone(ctx)


def assert_instance(store: ContextStore, ctx: str, concept: str) -> InstanceRef:
    return store.assert_instance(ctx, concept)


def concept_check(store, ctx, head, role, filler, metrics) -> Optional[str]:
    """Terminological admissibility of one role filling.

    Counts exactly one check, pass or fail. On success returns a fresh
    child context of `ctx` carrying the new role assertion; on failure
    returns None and `ctx` is untouched.
    """
    head_id = head.id if isinstance(head, InstanceRef) else head
    filler_id = filler.id if isinstance(filler, InstanceRef) else filler
    defs = store.kb.role_defs(role)  # unknown role is an error, not a failed check
    head_concept = store.concept_of(ctx, head_id)
    filler_concept = store.concept_of(ctx, filler_id)
    metrics.count_concept_check()
    admitted = any(
        store.kb.subsumes(d.domain, head_concept)
        and store.kb.subsumes(d.range, filler_concept)
        for d in defs
    )
    if not admitted:
        return None
    child = store.clone(ctx)
    store.add_assertion(child, head_id, role, filler_id)
    return child


def extract_interpretation(store: ContextStore, ctx: str) -> Interpretation:
    return store.extract(ctx)
