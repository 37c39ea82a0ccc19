"""Kernel backend selection.

The compiled extension is used when it imports and the graph fits in 64
vertices; otherwise the pure-Python kernels run. Set ``QCYCLE_PURE_PYTHON=1``
to force the fallback.
"""

from __future__ import annotations

import os
from typing import Sequence

from . import _pykernels

_compiled = None
if os.environ.get("QCYCLE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined, no-redef]
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None

BACKEND = _compiled.BACKEND if _compiled is not None else _pykernels.BACKEND


def _fits(n: int) -> bool:
    return _compiled is not None and n <= 64


def is_acyclic(children: Sequence[int]) -> bool:
    if _fits(len(children)):
        return _compiled.is_acyclic(children)
    return _pykernels.is_acyclic(children)


def acyclic_edge_masks(n: int, src: Sequence[int], dst: Sequence[int]) -> list[int]:
    if _fits(n) and len(src) <= 40:
        return _compiled.acyclic_edge_masks(n, src, dst)
    return _pykernels.acyclic_edge_masks(n, src, dst)


def valid_vertex_split_masks(n: int, src: Sequence[int], dst: Sequence[int]) -> list[int]:
    if _fits(n) and n <= 40:
        return _compiled.valid_vertex_split_masks(n, src, dst)
    return _pykernels.valid_vertex_split_masks(n, src, dst)


def d_separated(children: Sequence[int], x: int, y: int, z: int) -> bool:
    if _fits(len(children)):
        return _compiled.d_separated(children, x, y, z)
    return _pykernels.d_separated(children, x, y, z)


def first_d_separated(members: Sequence[Sequence[int]], posts: Sequence[int], x: int, y: int, z: int) -> int:
    width = max((len(m) for m in members), default=0)
    if _fits(width):
        return _compiled.first_d_separated(members, posts, x, y, z)
    return _pykernels.first_d_separated(members, posts, x, y, z)
