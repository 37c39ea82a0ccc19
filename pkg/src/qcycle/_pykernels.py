"""Pure-Python bitmask graph kernels.

Graphs are given as a list ``children`` where ``children[v]`` is an integer
bitmask of the children of vertex ``v``. Python integers make these kernels
work for any vertex count; the compiled twin is limited to 64 vertices.
"""

from __future__ import annotations

from typing import Sequence

BACKEND = "python"
MAX_VERTICES = None


def _parents(children: Sequence[int]) -> list[int]:
    n = len(children)
    pa = [0] * n
    for u in range(n):
        c = children[u]
        while c:
            low = c & -c
            pa[low.bit_length() - 1] |= 1 << u
            c ^= low
    return pa


def is_acyclic(children: Sequence[int]) -> bool:
    """Kahn elimination; a self-loop is a cycle."""
    n = len(children)
    pa = _parents(children)
    remaining = (1 << n) - 1
    while remaining:
        progressed = False
        for v in range(n):
            bit = 1 << v
            if remaining & bit and not (pa[v] & remaining):
                remaining ^= bit
                progressed = True
        if not progressed:
            return False
    return True


def _acyclic_mask_subset(n: int, src: Sequence[int], dst: Sequence[int], mask: int) -> bool:
    ch = [0] * n
    k = 0
    while mask:
        if mask & 1:
            ch[src[k]] |= 1 << dst[k]
        mask >>= 1
        k += 1
    return is_acyclic(ch)


def acyclic_edge_masks(n: int, src: Sequence[int], dst: Sequence[int]) -> list[int]:
    """All edge-subset masks (bit k = edge k) whose subgraph is acyclic, ascending."""
    m = len(src)
    return [mask for mask in range(1 << m) if _acyclic_mask_subset(n, src, dst, mask)]


def valid_vertex_split_masks(n: int, src: Sequence[int], dst: Sequence[int]) -> list[int]:
    """Vertex masks S such that dropping all out-edges of S leaves an acyclic graph."""
    out = []
    for s in range(1 << n):
        ch = [0] * n
        for u, v in zip(src, dst):
            if not (s >> u) & 1:
                ch[u] |= 1 << v
        if is_acyclic(ch):
            out.append(s)
    return out


def _ancestors(pa: Sequence[int], z: int) -> int:
    anc = z
    frontier = z
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= pa[low.bit_length() - 1]
            f ^= low
        frontier = nxt & ~anc
        anc |= nxt
    return anc


def _dsep(children: Sequence[int], pa: Sequence[int], x: int, y: int, z: int) -> bool:
    anc = _ancestors(pa, z)
    up_seen = up = x
    down_seen = down = 0
    while up or down:
        new_up = 0
        new_down = 0
        f = up & ~z
        while f:
            low = f & -f
            v = low.bit_length() - 1
            new_up |= pa[v]
            new_down |= children[v]
            f ^= low
        f = down
        while f:
            low = f & -f
            v = low.bit_length() - 1
            if not low & z:
                new_down |= children[v]
            if low & anc:
                new_up |= pa[v]
            f ^= low
        up = new_up & ~up_seen
        down = new_down & ~down_seen
        up_seen |= up
        down_seen |= down
        if (up_seen | down_seen) & ~z & y:
            return False
    return True


def d_separated(children: Sequence[int], x: int, y: int, z: int) -> bool:
    """Reachability ("Bayes-ball") d-separation test on bitmasks."""
    return _dsep(children, _parents(children), x, y, z)


def first_d_separated(members: Sequence[Sequence[int]], posts: Sequence[int], x: int, y: int, z: int) -> int:
    """Index of the first member graph where ``x`` and ``y`` are d-separated by ``z | posts[i]``.

    Returns -1 when no member separates.
    """
    for i, ch in enumerate(members):
        if _dsep(ch, _parents(ch), x, y, z | posts[i]):
            return i
    return -1
