"""Time the compiled graph kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Workloads: acyclic edge-subset enumeration, vertex-split enumeration, single
d-separation queries, and the p-separation family scan over the queries of a
few cyclic graphs (a spread of up to 300 queries each).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qcycle import _pykernels
from qcycle.graph import CausalGraph, edge_family_masks
from qcycle.separation import all_queries

try:
    from qcycle import _kernels
except ImportError:  # extension not built
    _kernels = None


def graphs() -> list[CausalGraph]:
    ring = [f"r{i}" for i in range(6)]
    dense = [f"d{i}" for i in range(5)]
    return [
        CausalGraph.build(ring, [(ring[i], ring[(i + 1) % 6]) for i in range(6)] + [(ring[i], ring[(i + 3) % 6]) for i in range(3)]),
        CausalGraph.build(dense, [(a, b) for i, a in enumerate(dense) for j, b in enumerate(dense) if (j - i) % 5 in (1, 2, 4)][:12]),
        CausalGraph.build(["v1", "v2", "v3", "v4"], [("v1", "v2"), ("v2", "v1"), ("v3", "v1"), ("v4", "v2"), ("v1", "v1")]),
    ]


def workloads(mod, g: CausalGraph, packed_ok: bool):
    src, dst = g.src_dst()
    children = g.children_masks()
    members, posts = edge_family_masks(g, cap=30)
    packed = members
    if packed_ok:
        width = max(len(m) for m in members)
        packed = np.zeros((len(members), width), dtype=np.uint64)
        for i, m in enumerate(members):
            packed[i, : len(m)] = m
    queries = [(g.vertex_mask(q.v1), g.vertex_mask(q.v2), g.vertex_mask(q.v3)) for q in all_queries(g.ids)]
    scan = queries[::max(1, len(queries) // 300)]
    return {
        "acyclic edge subsets": lambda: mod.acyclic_edge_masks(g.n, src, dst),
        "vertex split sets": lambda: mod.valid_vertex_split_masks(g.n, src, dst),
        "d-separation (all queries)": lambda: [mod.d_separated(children, *q) for q in queries],
        "p-separation scan (300 queries)": lambda: [mod.first_d_separated(packed, posts, *q) for q in scan],
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels are not built; nothing to compare")
        return
    print(f"{'graph':>6} {'workload':<32} {'python s':>10} {'cython s':>10} {'speed-up':>9}")
    for gi, g in enumerate(graphs()):
        py = workloads(_pykernels, g, packed_ok=False)
        cy = workloads(_kernels, g, packed_ok=True)
        for name in py:
            assert py[name]() == cy[name](), name
            tp, tc = best_of(py[name], args.repeat), best_of(cy[name], args.repeat)
            print(f"{gi:>6} {name:<32} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
