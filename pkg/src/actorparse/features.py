"""Flat feature structures and their unification.

A feature structure is an immutable, flat attribute/value matrix. Values
are atoms (strings) or the unconstrained marker ``"*"``, which unifies
with anything and resolves to the other side's atom.
"""

from __future__ import annotations

from typing import Iterator, Mapping, Optional

ANY = "*"


class FeatureStructure(Mapping[str, str]):
    """Immutable flat map from attribute names to atomic values."""

    __slots__ = ("_pairs", "_hash")

    def __init__(self, pairs: Mapping[str, str] | None = None, **extra: str):
        merged = dict(pairs) if pairs else {}
        merged.update(extra)
        for key, value in merged.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise TypeError("feature attributes and values must be strings")
        self._pairs = merged
        self._hash = hash(frozenset(merged.items()))

    def __getitem__(self, key: str) -> str:
        return self._pairs[key]

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._pairs))

    def __len__(self) -> int:
        return len(self._pairs)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FeatureStructure):
            return self._pairs == other._pairs
        if isinstance(other, Mapping):
            return self._pairs == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}:{v}" for k, v in sorted(self._pairs.items()))
        return "{" + inner + "}"

    def project(self, *attrs: str) -> "FeatureStructure":
        """Restriction to the given attributes (missing ones are dropped)."""
        return FeatureStructure({a: self._pairs[a] for a in attrs if a in self._pairs})

    def unify(self, other: "FeatureStructure") -> Optional["FeatureStructure"]:
        return unify(self, other)


def unify(a: FeatureStructure, b: FeatureStructure) -> Optional[FeatureStructure]:
    """Unify two flat feature structures.

    Returns the merged structure, or None on an atom clash. Shared
    attributes must carry equal atoms, or the unconstrained marker on one
    side (which resolves to the other side's value).
    """
    if len(b) < len(a):
        a, b = b, a
    merged = dict(b)
    for attr, value in a.items():
        existing = merged.get(attr)
        if existing is None or existing == ANY:
            merged[attr] = value
        elif value != ANY and value != existing:
            return None
    return FeatureStructure(merged)


EMPTY = FeatureStructure()
