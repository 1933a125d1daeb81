"""Algebra over ANOVA index sets: families of subsets of {1, ..., d}.

Subsets are canonical tuples of strictly increasing 1-based variable
indices; the empty tuple () is the constant term and is a first-class
member. Index families are value objects with set semantics.
"""

from __future__ import annotations

import itertools
import json

Subset = tuple[int, ...]


def normalize_subset(members, dimension=None) -> Subset:
    """Return a validated canonical subset tuple (sorted, distinct, 1-based)."""
    u = tuple(sorted(int(i) for i in members))
    if len(set(u)) != len(u):
        raise ValueError(f"duplicate members in subset {u}")
    if u and u[0] < 1:
        raise ValueError(f"subset members must be >= 1, got {u}")
    if dimension is not None and u and u[-1] > dimension:
        raise ValueError(f"subset {u} exceeds dimension {dimension}")
    return u


class AnovaIndexSet:
    """A finite family of variable subsets of {1, ..., d}.

    Order-independent equality; iteration follows the canonical ordering
    (by cardinality, then lexicographically by members).
    """

    __slots__ = ("dimension", "terms")

    def __init__(self, dimension: int, terms=()):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = int(dimension)
        self.terms = frozenset(normalize_subset(u, self.dimension) for u in terms)

    def sorted_terms(self) -> list[Subset]:
        return sorted(self.terms, key=lambda u: (len(u), u))

    def __iter__(self):
        return iter(self.sorted_terms())

    def __len__(self):
        return len(self.terms)

    def __contains__(self, u):
        return normalize_subset(u) in self.terms

    def __eq__(self, other):
        if not isinstance(other, AnovaIndexSet):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __hash__(self):
        return hash((self.dimension, self.terms))

    def __repr__(self):
        inner = ", ".join("{" + ",".join(map(str, u)) + "}" for u in self.sorted_terms())
        return f"AnovaIndexSet(d={self.dimension}, {{{inner}}})"

    def replace_terms(self, terms) -> "AnovaIndexSet":
        return AnovaIndexSet(self.dimension, terms)

    # --- serialization ------------------------------------------------

    def to_json(self) -> str:
        """JSON array of arrays of 1-based indices, canonical order."""
        return json.dumps([list(u) for u in self.sorted_terms()])

    @classmethod
    def from_json(cls, text: str, dimension: int) -> "AnovaIndexSet":
        return cls(dimension, [tuple(u) for u in json.loads(text)])

    def to_text(self) -> str:
        """Compact CLI form, e.g. ``1,2;3`` (the empty set renders as ``-``)."""
        return ";".join("-" if not u else ",".join(map(str, u)) for u in self.sorted_terms())

    @classmethod
    def from_text(cls, text: str, dimension: int) -> "AnovaIndexSet":
        text = text.strip()
        if not text:
            return cls(dimension, [])
        terms = []
        for part in text.split(";"):
            part = part.strip()
            terms.append(() if part in ("", "-") else tuple(int(t) for t in part.split(",")))
        return cls(dimension, terms)


def all_subsets_of_order(d: int, q: int) -> AnovaIndexSet:
    """All C(d, q) subsets of {1, ..., d} with exactly q elements."""
    if q < 0 or q > d:
        raise ValueError(f"order q={q} outside 0..{d}")
    return AnovaIndexSet(d, itertools.combinations(range(1, d + 1), q))


def all_subsets_up_to_order(d: int, q: int) -> AnovaIndexSet:
    """All subsets of cardinality <= q, including the empty set."""
    if q < 0 or q > d:
        raise ValueError(f"order q={q} outside 0..{d}")
    terms = itertools.chain.from_iterable(
        itertools.combinations(range(1, d + 1), k) for k in range(q + 1)
    )
    return AnovaIndexSet(d, terms)


def downward_closure(U: AnovaIndexSet) -> AnovaIndexSet:
    """All subsets of members of U (the closure under taking subsets)."""
    closed = set()
    for u in U.terms:
        for k in range(len(u) + 1):
            closed.update(itertools.combinations(u, k))
    return U.replace_terms(closed)


def is_downward_closed(U: AnovaIndexSet) -> bool:
    return U == downward_closure(U)


def prune_to_anti_downward_closed(U: AnovaIndexSet) -> AnovaIndexSet:
    """Drop every member that is a strict subset of another member."""
    kept = [
        u
        for u in U.terms
        if not any(u != v and set(u) < set(v) for v in U.terms)
    ]
    return U.replace_terms(kept)


def is_anti_downward_closed(U: AnovaIndexSet) -> bool:
    """No member is a (strict) subset of another member."""
    return all(
        not (set(u) < set(v)) for u in U.terms for v in U.terms if u != v
    )


def uncovered_subsets(U: AnovaIndexSet, k: int) -> AnovaIndexSet:
    """All k-subsets of {1, ..., d} not strictly contained in any member of U."""
    if k < 0 or k > U.dimension:
        raise ValueError(f"order k={k} outside 0..{U.dimension}")
    out = [
        v
        for v in itertools.combinations(range(1, U.dimension + 1), k)
        if not any(set(v) < set(u) for u in U.terms)
    ]
    return U.replace_terms(out)


def maximal_terms(U: AnovaIndexSet) -> set[Subset]:
    """Members of U with no strict superset in U."""
    return {
        u
        for u in U.terms
        if not any(u != v and set(u) < set(v) for v in U.terms)
    }
