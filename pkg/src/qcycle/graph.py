"""Causal graphs and their acyclic teleportation-graph families."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels
from .errors import CapExceededError, GraphError

OBSERVED = "observed"
UNOBSERVED = "unobserved"
CLASSICAL = "classical"
QUANTUM = "quantum"

DEFAULT_CAP = 20

Edge = tuple[str, str]


@dataclass(frozen=True)
class CausalGraph:
    """Directed graph with observed/unobserved vertices and classical/quantum edges.

    Self-loops are allowed; parallel edges are not. Vertex and edge order are
    significant: they fix tensor-factor ordering and enumeration order.
    """

    vertices: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str, str], ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        verts = tuple((str(v), k) for v, k in self.vertices)
        edges = tuple((str(u), str(v), k) for u, v, k in self.edges)
        index: dict[str, int] = {}
        for i, (v, kind) in enumerate(verts):
            if kind not in (OBSERVED, UNOBSERVED):
                raise GraphError(f"vertex {v!r} has unknown kind {kind!r}")
            if v in index:
                raise GraphError(f"duplicate vertex {v!r}")
            index[v] = i
        seen = set()
        for u, v, kind in edges:
            if kind not in (CLASSICAL, QUANTUM):
                raise GraphError(f"edge ({u}, {v}) has unknown kind {kind!r}")
            for end in (u, v):
                if end not in index:
                    raise GraphError(f"edge ({u}, {v}) references undeclared vertex {end!r}")
            if (u, v) in seen:
                raise GraphError(f"parallel edge ({u}, {v}); use a larger edge space instead")
            seen.add((u, v))
            if verts[index[u]][1] == OBSERVED and kind != CLASSICAL:
                raise GraphError(f"edge ({u}, {v}) leaves observed vertex {u!r} and must be classical")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(cls, vertices: Iterable, edges: Iterable) -> "CausalGraph":
        """Convenience constructor.

        ``vertices`` items are ids (observed) or ``(id, kind)`` pairs; ``edges``
        items are ``(u, v)`` (classical) or ``(u, v, kind)``.
        """
        vs = [(v, OBSERVED) if isinstance(v, str) else tuple(v) for v in vertices]
        es = [(e[0], e[1], CLASSICAL) if len(e) == 2 else tuple(e) for e in edges]
        return cls(tuple(vs), tuple(es))

    # -- lookup -----------------------------------------------------------
    @property
    def ids(self) -> list[str]:
        return [v for v, _ in self.vertices]

    @property
    def n(self) -> int:
        return len(self.vertices)

    def index(self, v: str) -> int:
        try:
            return self._index[v]
        except KeyError:
            raise GraphError(f"unknown vertex {v!r}") from None

    def kind(self, v: str) -> str:
        return self.vertices[self.index(v)][1]

    def is_observed(self, v: str) -> bool:
        return self.kind(v) == OBSERVED

    @property
    def observed(self) -> list[str]:
        return [v for v, k in self.vertices if k == OBSERVED]

    @property
    def edge_pairs(self) -> list[Edge]:
        return [(u, v) for u, v, _ in self.edges]

    @cached_property
    def _edge_pos(self) -> dict[Edge, int]:
        return {(u, v): i for i, (u, v, _) in enumerate(self.edges)}

    def edge_index(self, e: Edge) -> int:
        try:
            return self._edge_pos[tuple(e)]
        except KeyError:
            raise GraphError(f"unknown edge {e!r}") from None

    def edge_kind(self, e: Edge) -> str:
        return self.edges[self.edge_index(e)][2]

    def parents(self, v: str) -> set[str]:
        self.index(v)
        return {a for a, b, _ in self.edges if b == v}

    def children(self, v: str) -> set[str]:
        self.index(v)
        return {b for a, b, _ in self.edges if a == v}

    def in_edges(self, v: str) -> list[Edge]:
        """Incoming edges ordered by (source index, declaration order)."""
        self.index(v)
        es = [(i, (a, b)) for i, (a, b, _) in enumerate(self.edges) if b == v]
        es.sort(key=lambda t: (self.index(t[1][0]), t[0]))
        return [e for _, e in es]

    def out_edges(self, v: str) -> list[Edge]:
        """Outgoing edges ordered by (target index, declaration order)."""
        self.index(v)
        es = [(i, (a, b)) for i, (a, b, _) in enumerate(self.edges) if a == v]
        es.sort(key=lambda t: (self.index(t[1][1]), t[0]))
        return [e for _, e in es]

    def descendants(self, v: str) -> set[str]:
        """Vertices reachable from ``v`` by directed paths, including ``v``."""
        return self._descendants[self.index(v)]

    @cached_property
    def _descendants(self) -> list[set[str]]:
        ch = {u: self.children(u) for u in self.ids}
        out = []
        for v in self.ids:
            seen = {v}
            stack = [v]
            while stack:
                for c in ch[stack.pop()]:
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
            out.append(seen)
        return out

    # -- bitmask views ----------------------------------------------------
    def src_dst(self) -> tuple[list[int], list[int]]:
        return [self.index(u) for u, _, _ in self.edges], [self.index(v) for _, v, _ in self.edges]

    def children_masks(self, edge_mask: int | None = None) -> list[int]:
        ch = [0] * self.n
        for k, (u, v, _) in enumerate(self.edges):
            if edge_mask is None or (edge_mask >> k) & 1:
                ch[self.index(u)] |= 1 << self.index(v)
        return ch

    def vertex_mask(self, vs: Iterable[str]) -> int:
        m = 0
        for v in vs:
            m |= 1 << self.index(v)
        return m

    def is_acyclic(self) -> bool:
        return is_acyclic(self)

    def topological_order(self) -> list[str]:
        """Kahn order with ties broken by vertex index."""
        if not self.is_acyclic():
            raise GraphError("graph has a directed cycle")
        indeg = {v: len(self.parents(v)) for v in self.ids}
        order: list[str] = []
        ready = [v for v in self.ids if indeg[v] == 0]
        while ready:
            ready.sort(key=self.index)
            v = ready.pop(0)
            order.append(v)
            for c in sorted(self.children(v), key=self.index):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return order

    def with_edges(self, keep: Iterable[int]) -> "CausalGraph":
        keep = set(keep)
        return CausalGraph(self.vertices, tuple(e for i, e in enumerate(self.edges) if i in keep))


def parents(g: CausalGraph, v: str) -> set[str]:
    return g.parents(v)


def is_acyclic(g: CausalGraph | Sequence[int]) -> bool:
    """True iff there is no directed cycle; a self-loop is a cycle.

    Accepts a :class:`CausalGraph` or a list of children bitmasks.
    """
    if isinstance(g, CausalGraph):
        return kernels.is_acyclic(g.children_masks())
    return kernels.is_acyclic(list(g))


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _enumeration_order(masks: Sequence[int], width: int, fewest_first: bool) -> list[int]:
    """Sort subsets by size, then lexicographically by element order.

    For equal-size sets, lexicographic order of the sorted index tuples equals
    descending order of the bit-reversed mask.
    """
    def rev(x: int) -> int:
        return int(f"{x:0{width}b}"[::-1], 2) if width else 0

    sign = 1 if fewest_first else -1
    return sorted(masks, key=lambda m: (sign * _popcount(m), -rev(m)))


def _check_cap(count: int, cap: int, what: str) -> None:
    if cap < 1:
        raise ValueError("cap must be a positive integer")
    if count > cap:
        raise CapExceededError(
            f"graph has {count} {what}, above the enumeration cap of {cap}; "
            f"raise the cap (cap={count} or --cap {count}) to enumerate 2^{count} subsets"
        )


def acyclic_edge_subset_masks(g: CausalGraph, cap: int = DEFAULT_CAP) -> list[int]:
    """Edge-subset bitmasks (bit k = k-th edge) of acyclic subgraphs in enumeration order."""
    m = len(g.edges)
    _check_cap(m, cap, "edges")
    src, dst = g.src_dst()
    masks = kernels.acyclic_edge_masks(g.n, src, dst)
    return _enumeration_order(masks, m, fewest_first=False)


def enumerate_acyclic_edge_subsets(g: CausalGraph, cap: int = DEFAULT_CAP) -> Iterator[tuple[Edge, ...]]:
    """Yield every E' with (V, E') acyclic: largest first, then lexicographic by edge order."""
    pairs = g.edge_pairs
    for mask in acyclic_edge_subset_masks(g, cap):
        yield tuple(pairs[k] for k in range(len(pairs)) if (mask >> k) & 1)


def vertex_split_masks(g: CausalGraph, cap: int = DEFAULT_CAP) -> list[int]:
    _check_cap(g.n, cap, "vertices")
    src, dst = g.src_dst()
    masks = kernels.valid_vertex_split_masks(g.n, src, dst)
    return _enumeration_order(masks, g.n, fewest_first=True)


def enumerate_vertex_split_sets(g: CausalGraph, cap: int = DEFAULT_CAP) -> Iterator[tuple[str, ...]]:
    """Yield every valid split set: fewest vertices first, then lexicographic by vertex order."""
    ids = g.ids
    for mask in vertex_split_masks(g, cap):
        yield tuple(ids[k] for k in range(len(ids)) if (mask >> k) & 1)


def pre_id(k) -> str:
    return f"R#{k}"


def post_id(k) -> str:
    return f"T#{k}"


@dataclass(frozen=True)
class TeleportationGraph:
    """Acyclic member of the edge-split family of ``base``.

    ``split`` lists split-edge indices in base order; split edge ``k`` gets
    pre-selection vertex ``R#k`` and post-selection vertex ``T#k``.
    """

    base: CausalGraph
    kept: frozenset[int]
    split: tuple[int, ...]
    derived: CausalGraph

    @property
    def split_edges(self) -> list[Edge]:
        return [self.base.edge_pairs[k] for k in self.split]

    @property
    def kept_edges(self) -> list[Edge]:
        return [self.base.edge_pairs[k] for k in sorted(self.kept)]

    @property
    def post_vertices(self) -> list[str]:
        return [post_id(k) for k in self.split]

    @property
    def pre_vertices(self) -> list[str]:
        return [pre_id(k) for k in self.split]


def _edge_indices(g: CausalGraph, kept: Iterable) -> set[int]:
    out = set()
    for e in kept:
        out.add(int(e) if isinstance(e, (int, np.integer)) else g.edge_index(tuple(e)))
    return out


def build_teleportation_graph(g: CausalGraph, kept: Iterable) -> TeleportationGraph:
    """Split every edge outside ``kept`` (edges as pairs or base indices)."""
    keep = _edge_indices(g, kept)
    if not kernels.is_acyclic(g.children_masks(sum(1 << k for k in keep))):
        raise GraphError("kept edge subset is cyclic; choose an acyclic subset")
    split = tuple(k for k in range(len(g.edges)) if k not in keep)
    verts = list(g.vertices)
    for k in split:
        verts.append((pre_id(k), UNOBSERVED))
        verts.append((post_id(k), OBSERVED))
    edges = []
    for k, (u, v, kind) in enumerate(g.edges):
        if k in keep:
            edges.append((u, v, kind))
        else:
            edges.append((u, post_id(k), kind))
            edges.append((pre_id(k), post_id(k), QUANTUM))
            edges.append((pre_id(k), v, QUANTUM))
    return TeleportationGraph(g, frozenset(keep), split, CausalGraph(tuple(verts), tuple(edges)))


def maximal_teleportation_graph(g: CausalGraph) -> TeleportationGraph:
    return build_teleportation_graph(g, ())


@dataclass(frozen=True)
class VertexSplitGraph:
    """Member of the vertex-split family: every out-edge of a split vertex ``v``
    is rerouted through one pre-selection vertex ``R#v``, and ``v`` feeds ``T#v``."""

    base: CausalGraph
    split_vertices: tuple[str, ...]
    derived: CausalGraph

    @property
    def post_vertices(self) -> list[str]:
        return [post_id(v) for v in self.split_vertices]

    @property
    def pre_vertices(self) -> list[str]:
        return [pre_id(v) for v in self.split_vertices]


def build_vertex_split_graph(g: CausalGraph, split_vertices: Iterable[str]) -> VertexSplitGraph:
    chosen = set(split_vertices)
    for v in chosen:
        g.index(v)
    ordered = tuple(v for v in g.ids if v in chosen)
    keep = [k for k, (u, _, _) in enumerate(g.edges) if u not in chosen]
    if not kernels.is_acyclic(g.children_masks(sum(1 << k for k in keep))):
        raise GraphError("invalid split set: removing its out-edges leaves a cycle")
    taken = set(g.ids)
    for v in ordered:
        for new in (pre_id(v), post_id(v)):
            if new in taken:
                raise GraphError(f"generated vertex id {new!r} collides with an existing vertex")
    verts = list(g.vertices)
    edges = [g.edges[k] for k in keep]
    for v in ordered:
        verts.append((pre_id(v), UNOBSERVED))
        verts.append((post_id(v), OBSERVED))
        edges.append((v, post_id(v), CLASSICAL if g.is_observed(v) else QUANTUM))
        edges.append((pre_id(v), post_id(v), QUANTUM))
        for u, c, kind in g.edges:
            if u == v:
                edges.append((pre_id(v), c, kind))
    return VertexSplitGraph(g, ordered, CausalGraph(tuple(verts), tuple(edges)))


# -- bitmask family members (used by p-separation) -----------------------------

def edge_family_masks(g: CausalGraph, cap: int = DEFAULT_CAP) -> tuple[list[list[int]], list[int]]:
    """Children masks and post-selection masks for every edge-split family member.

    Base vertices keep their indices; generated pairs are appended per split edge.
    """
    src, dst = g.src_dst()
    n = g.n
    members, posts = [], []
    for mask in acyclic_edge_subset_masks(g, cap):
        ch = [0] * n
        post = 0
        for k in range(len(src)):
            if (mask >> k) & 1:
                ch[src[k]] |= 1 << dst[k]
            else:
                r, t = len(ch), len(ch) + 1
                ch.extend((0, 0))
                ch[src[k]] |= 1 << t
                ch[r] = (1 << t) | (1 << dst[k])
                post |= 1 << t
        members.append(ch)
        posts.append(post)
    return members, posts


def vertex_family_masks(g: CausalGraph, cap: int = DEFAULT_CAP) -> tuple[list[list[int]], list[int]]:
    src, dst = g.src_dst()
    n = g.n
    base_ch = g.children_masks()
    members, posts = [], []
    for split in vertex_split_masks(g, cap):
        ch = list(base_ch)
        post = 0
        for v in range(n):
            if (split >> v) & 1:
                t = len(ch) + 1
                ch.extend((base_ch[v] | (1 << t), 0))
                ch[v] = 1 << t
                post |= 1 << t
        members.append(ch)
        posts.append(post)
    return members, posts
