"""d-separation, p-separation and conditional-independence tests."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterable

import numpy as np

from . import kernels
from .distribution import Distribution
from .errors import GraphError
from .graph import DEFAULT_CAP, CausalGraph, edge_family_masks, vertex_family_masks

EDGE_SPLIT = "edge_split"
VERTEX_SPLIT = "vertex_split"
_VARIANTS = {"edge": EDGE_SPLIT, "edge_split": EDGE_SPLIT, "vertex": VERTEX_SPLIT, "vertex_split": VERTEX_SPLIT}


@dataclass(frozen=True)
class SeparationQuery:
    v1: frozenset[str]
    v2: frozenset[str]
    v3: frozenset[str] = frozenset()

    @classmethod
    def of(cls, v1: Iterable[str], v2: Iterable[str], v3: Iterable[str] = ()) -> "SeparationQuery":
        as_set = lambda s: frozenset([s]) if isinstance(s, str) else frozenset(s)  # noqa: E731
        return cls(as_set(v1), as_set(v2), as_set(v3))

    def validate(self, g: CausalGraph) -> None:
        if not self.v1 or not self.v2:
            raise GraphError("the first two vertex sets of a separation query must be non-empty")
        if self.v1 & self.v2 or self.v1 & self.v3 or self.v2 & self.v3:
            raise GraphError("separation query sets must be pairwise disjoint")
        for v in self.v1 | self.v2 | self.v3:
            g.index(v)

    def swapped(self) -> "SeparationQuery":
        return SeparationQuery(self.v2, self.v1, self.v3)


def _masks(g: CausalGraph, q: SeparationQuery) -> tuple[int, int, int]:
    return g.vertex_mask(q.v1), g.vertex_mask(q.v2), g.vertex_mask(q.v3)


def d_separated(g: CausalGraph, q: SeparationQuery) -> bool:
    """Every path between ``q.v1`` and ``q.v2`` is blocked by ``q.v3``.

    Uses bitmask reachability; :func:`d_separated_paths` is the path-enumerating
    reference it is tested against.
    """
    q.validate(g)
    x, y, z = _masks(g, q)
    return kernels.d_separated(g.children_masks(), x, y, z)


def d_separated_paths(g: CausalGraph, q: SeparationQuery) -> bool:
    """Reference d-separation by depth-first enumeration of simple undirected paths.

    Self-loops never appear on a path; they only make a vertex its own
    descendant, which it already is.
    """
    q.validate(g)
    nbrs: dict[str, list[tuple[str, bool]]] = {v: [] for v in g.ids}
    for u, v, _ in g.edges:
        if u == v:
            continue
        nbrs[u].append((v, True))   # u -> v, traversed forward
        nbrs[v].append((u, False))  # traversed against the arrow
    z = q.v3
    opens_collider = {v: bool(g.descendants(v) & z) for v in g.ids}

    def connected(start: str) -> bool:
        # state: (vertex, arrived_by_forward_edge or None, visited)
        stack: list[tuple[str, bool | None, frozenset[str]]] = [(start, None, frozenset([start]))]
        while stack:
            w, arrived_fwd, seen = stack.pop()
            for nxt, fwd in nbrs[w]:
                if nxt in seen:
                    continue
                if arrived_fwd is not None:
                    collider = arrived_fwd and not fwd
                    if collider and not opens_collider[w]:
                        continue
                    if not collider and w in z:
                        continue
                if nxt in q.v2:
                    return True
                stack.append((nxt, fwd, seen | {nxt}))
        return False

    return not any(connected(a) for a in sorted(q.v1, key=g.index))


def _family(g: CausalGraph, variant: str, cap: int):
    try:
        variant = _VARIANTS[variant]
    except KeyError:
        raise ValueError(f"unknown family variant {variant!r}; use 'edge' or 'vertex'") from None
    return edge_family_masks(g, cap) if variant == EDGE_SPLIT else vertex_family_masks(g, cap)


class PSeparationOracle:
    """Answers p-separation queries on one graph, enumerating its family once."""

    def __init__(self, g: CausalGraph, variant: str = EDGE_SPLIT, cap: int = DEFAULT_CAP):
        self.graph = g
        self.members, self.posts = _family(g, variant, cap)
        width = max(len(m) for m in self.members)
        self._packed = np.zeros((len(self.members), width), dtype=np.uint64) if width <= 64 else None
        if self._packed is not None:
            for i, m in enumerate(self.members):
                self._packed[i, : len(m)] = m

    def witness(self, q: SeparationQuery) -> int:
        """Index of the first family member separating the query, or -1."""
        q.validate(self.graph)
        x, y, z = _masks(self.graph, q)
        members = self._packed if self._packed is not None and kernels.BACKEND == "cython" else self.members
        return kernels.first_d_separated(members, self.posts, x, y, z)

    def __call__(self, q: SeparationQuery) -> bool:
        return self.witness(q) >= 0


def p_separated(
    g: CausalGraph,
    q: SeparationQuery,
    variant: str = EDGE_SPLIT,
    cap: int = DEFAULT_CAP,
) -> bool:
    """True iff some family member d-separates the query given ``q.v3`` plus its post-selection vertices."""
    q.validate(g)
    return PSeparationOracle(g, variant, cap)(q)


@dataclass(frozen=True)
class CIResult:
    independent: bool
    max_violation: float

    def __bool__(self) -> bool:
        return self.independent


def conditionally_independent(
    d: Distribution,
    x1: Iterable[str],
    x2: Iterable[str],
    x3: Iterable[str] = (),
    tol: float = 1e-9,
) -> CIResult:
    """Check ``P(x1,x2|x3) = P(x1|x3) P(x2|x3)`` on every ``x3`` with ``P(x3) > tol``."""
    a, b, c = list(x1), list(x2), list(x3)
    if not a or not b:
        raise ValueError("the first two variable sets must be non-empty")
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("variable sets must be pairwise disjoint")
    for v in a + b + c:
        d.axis(v)
    joint = d.marginal(a + b + c).table
    na, nb = len(a), len(b)
    shape = joint.shape
    sa = int(np.prod(shape[:na]))
    sb = int(np.prod(shape[na : na + nb]))
    sc = int(np.prod(shape[na + nb :]))
    t = joint.reshape(sa, sb, sc)
    pc = t.sum(axis=(0, 1))
    worst = 0.0
    for k in range(sc):
        if pc[k] <= tol:
            continue
        cond = t[:, :, k] / pc[k]
        dev = np.abs(cond - np.outer(cond.sum(axis=1), cond.sum(axis=0))).max()
        worst = max(worst, float(dev))
    return CIResult(worst <= tol, worst)


def all_queries(vertices: list[str]) -> Iterable[SeparationQuery]:
    """Every query with disjoint sets over ``vertices``, v1 and v2 non-empty."""
    for labels in product(range(4), repeat=len(vertices)):
        v1 = frozenset(v for v, l in zip(vertices, labels) if l == 1)
        v2 = frozenset(v for v, l in zip(vertices, labels) if l == 2)
        if v1 and v2:
            v3 = frozenset(v for v, l in zip(vertices, labels) if l == 3)
            yield SeparationQuery(v1, v2, v3)


def p_separated_many(
    g: CausalGraph,
    queries: list[SeparationQuery],
    variant: str = EDGE_SPLIT,
    cap: int = DEFAULT_CAP,
    threads: int = 1,
) -> list[bool]:
    oracle = PSeparationOracle(g, variant, cap)
    if threads <= 1:
        return [oracle(q) for q in queries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(oracle, queries))
