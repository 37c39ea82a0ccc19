# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitmask graph kernels (at most 64 vertices per graph).

Same contracts as ``_pykernels``; inputs are converted to uint64 arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"
MAX_VERTICES = 64

ctypedef uint64_t mask_t


cdef extern from *:
    int __builtin_ctzll(unsigned long long) nogil


cdef inline int _ctz(mask_t x) noexcept nogil:
    return __builtin_ctzll(x)


cdef void _parents(const mask_t* ch, mask_t* pa, int n) noexcept nogil:
    cdef int u
    cdef mask_t c, low
    for u in range(n):
        pa[u] = 0
    for u in range(n):
        c = ch[u]
        while c:
            low = c & (~c + 1)
            pa[_ctz(low)] |= (<mask_t>1) << u
            c ^= low


cdef bint _acyclic(const mask_t* pa, int n) noexcept nogil:
    cdef mask_t remaining, bit
    cdef int v
    cdef bint progressed
    if n == 64:
        remaining = <mask_t>0xFFFFFFFFFFFFFFFF
    else:
        remaining = ((<mask_t>1) << n) - 1
    while remaining:
        progressed = False
        for v in range(n):
            bit = (<mask_t>1) << v
            if (remaining & bit) and not (pa[v] & remaining):
                remaining ^= bit
                progressed = True
        if not progressed:
            return False
    return True


cdef bint _dsep(const mask_t* ch, const mask_t* pa, mask_t x, mask_t y, mask_t z) noexcept nogil:
    cdef mask_t anc = z, frontier = z, nxt, f, low
    cdef mask_t up, down, up_seen, down_seen, new_up, new_down
    cdef int v
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & (~f + 1)
            nxt |= pa[_ctz(low)]
            f ^= low
        frontier = nxt & ~anc
        anc |= nxt
    up = x
    up_seen = x
    down = 0
    down_seen = 0
    while up or down:
        new_up = 0
        new_down = 0
        f = up & ~z
        while f:
            low = f & (~f + 1)
            v = _ctz(low)
            new_up |= pa[v]
            new_down |= ch[v]
            f ^= low
        f = down
        while f:
            low = f & (~f + 1)
            v = _ctz(low)
            if not (low & z):
                new_down |= ch[v]
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


def _as_masks(children):
    arr = np.asarray([int(c) for c in children], dtype=np.uint64)
    if arr.shape[0] > 64:
        raise ValueError("compiled kernels support at most 64 vertices")
    return np.ascontiguousarray(arr)


def is_acyclic(children):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] ch = _as_masks(children)
    cdef int n = ch.shape[0]
    cdef mask_t pa[64]
    if n == 0:
        return True
    _parents(<mask_t*>ch.data, pa, n)
    return bool(_acyclic(pa, n))


def acyclic_edge_masks(int n, src, dst):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(dst, dtype=np.int64)
    cdef int m = s.shape[0]
    cdef int k, v
    cdef uint64_t mask, total
    cdef mask_t pa[64]
    if n > 64 or m > 40:
        raise ValueError("compiled kernels support at most 64 vertices and 40 edges")
    total = (<uint64_t>1) << m
    out = np.empty(total, dtype=np.uint64)
    cdef cnp.uint64_t[:] ov = out
    cdef int64_t count = 0
    with nogil:
        for mask in range(total):
            for v in range(n):
                pa[v] = 0
            for k in range(m):
                if (mask >> k) & 1:
                    pa[t[k]] |= (<mask_t>1) << s[k]
            if _acyclic(pa, n):
                ov[count] = mask
                count += 1
    return [int(x) for x in out[:count]]


def valid_vertex_split_masks(int n, src, dst):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] s = np.ascontiguousarray(src, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t = np.ascontiguousarray(dst, dtype=np.int64)
    cdef int m = s.shape[0]
    cdef int k, v
    cdef uint64_t split, total
    cdef mask_t pa[64]
    if n > 40:
        raise ValueError("compiled kernels support at most 40 vertices for split sets")
    total = (<uint64_t>1) << n
    out = np.empty(total, dtype=np.uint64)
    cdef cnp.uint64_t[:] ov = out
    cdef int64_t count = 0
    with nogil:
        for split in range(total):
            for v in range(n):
                pa[v] = 0
            for k in range(m):
                if not ((split >> s[k]) & 1):
                    pa[t[k]] |= (<mask_t>1) << s[k]
            if _acyclic(pa, n):
                ov[count] = split
                count += 1
    return [int(x) for x in out[:count]]


def d_separated(children, x, y, z):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] ch = _as_masks(children)
    cdef int n = ch.shape[0]
    cdef mask_t pa[64]
    _parents(<mask_t*>ch.data, pa, n)
    return bool(_dsep(<mask_t*>ch.data, pa, <mask_t>x, <mask_t>y, <mask_t>z))


def first_d_separated(members, posts, x, y, z):
    """Index of the first member whose d-separation holds given ``z | posts[i]``, else -1.

    ``members`` may be a 2-D uint64 array (rows zero-padded) or a list of mask lists.
    """
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] mat
    if isinstance(members, np.ndarray):
        mat = np.ascontiguousarray(members, dtype=np.uint64)
    else:
        width = max((len(row) for row in members), default=0)
        if width > 64:
            raise ValueError("compiled kernels support at most 64 vertices")
        mat = np.zeros((len(members), max(width, 1)), dtype=np.uint64)
        for r, row in enumerate(members):
            for j, c in enumerate(row):
                mat[r, j] = int(c)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] ps_arr = np.ascontiguousarray(
        [int(p) for p in posts], dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] mv = mat
    cdef cnp.uint64_t[::1] ps = ps_arr
    cdef int count = mat.shape[0]
    cdef int n = mat.shape[1]
    cdef int i
    cdef int found = -1
    cdef mask_t cx = <mask_t>x, cy = <mask_t>y, cz = <mask_t>z
    cdef mask_t pa[64]
    if n > 64:
        raise ValueError("compiled kernels support at most 64 vertices")
    with nogil:
        for i in range(count):
            _parents(<mask_t*>&mv[i, 0], pa, n)
            if _dsep(<mask_t*>&mv[i, 0], pa, cx, cy, cz | ps[i]):
                found = i
                break
    return found
