"""Probability rules: acyclic composition, self-cycles and the cyclic rule.

The canonical cyclic computation contracts one tensor network over the
maximal teleportation graph: every vertex contributes its transfer tensor,
and every edge joins its source's output indices with its target's input
indices. Edges leaving observed vertices carry ``|x><x|``, so both of their
indices are identified with that vertex's outcome index. The network is
sliced over the first observed variable; slices are what worker threads
share, so the summation order per outcome never depends on ``threads``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .distribution import Distribution
from .errors import DimensionError, GraphError, InconsistentModelError, ModelError
from .graph import CausalGraph, TeleportationGraph, build_teleportation_graph, maximal_teleportation_graph
from .model import (
    OK,
    CausalModel,
    ProtocolChoice,
    build_teleportation_model,
    ensure_valid,
    resolve_protocols,
)
from .tensor import KrausChannel

INCONSISTENT_THRESHOLD = 1e-12
MARKOV_TOL = 1e-9
DEFAULT_DIM_CAP = 4096
_IMAG_TOL = 1e-9

__all__ = [
    "CyclicResult",
    "Distribution",
    "acyclic_probability",
    "acyclic_weights",
    "composed_map",
    "cycle_weights",
    "cyclic_probability",
    "markov_check",
    "self_cycle",
]


def dim_cap() -> int:
    raw = os.environ.get("QCM_DIM_CAP")
    if raw is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"QCM_DIM_CAP must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError("QCM_DIM_CAP must be a positive integer")
    return cap


def _check_dimension(m: CausalModel, cap: int | None) -> None:
    cap = dim_cap() if cap is None else cap
    total = m.total_dimension()
    if total > cap:
        raise DimensionError(
            f"product of edge dimensions is {total}, above the cap of {cap}; "
            "set QCM_DIM_CAP to raise it"
        )


# -- self-cycle -----------------------------------------------------------------

def self_cycle(channel: KrausChannel | np.ndarray) -> complex:
    """``sum_{k,l} <k| M(|k><l|) |l>`` for a map whose input and output spaces agree.

    Accepts a :class:`KrausChannel` or a transfer tensor ``T[i, j, k, l]``
    (``M(|k><l|) = sum T[i,j,k,l] |i><j|``) of shape ``(d, d, d, d)`` or
    ``(d*d, d*d)`` grouped as ``(ij), (kl)``.
    """
    if isinstance(channel, KrausChannel):
        if channel.in_dim != channel.out_dim:
            raise DimensionError(f"self-cycle needs equal in/out dimensions, got {channel.in_dim}->{channel.out_dim}")
        d = channel.in_dim
        total = 0j
        for k in range(d):
            for l in range(d):
                # <k| sum_a K_a |k><l| K_a^dagger |l>
                total += np.sum(channel.kraus[:, k, k] * channel.kraus[:, l, l].conj())
        return complex(total)
    t = np.asarray(channel, dtype=complex)
    if t.ndim == 2:
        d = int(round(np.sqrt(t.shape[0])))
        if t.shape != (d * d, d * d):
            raise DimensionError(f"transfer matrix of shape {t.shape} is not (d^2, d^2)")
        t = t.reshape(d, d, d, d)
    if t.ndim != 4 or len(set(t.shape)) != 1:
        raise DimensionError(f"transfer tensor of shape {t.shape} does not have A = C")
    return complex(np.einsum("klkl->", t))


# -- network construction -------------------------------------------------------

@dataclass
class _Network:
    operands: list[np.ndarray]
    subscripts: list[list[int]]
    output: list[int]
    variables: list[tuple[str, tuple]]
    owners: list[str] = field(default_factory=list)


def _vertex_tensor(m: CausalModel, v: str) -> np.ndarray:
    """Transfer tensor of an unobserved vertex with per-edge axes.

    Axes: out rows, out cols, in rows, in cols (each split per edge).
    """
    dout, din = m.out_dims(v), m.in_dims(v)
    if v in m.states:
        t = m.states[v]
        return t.reshape(dout + dout) if dout else t.reshape(())
    t = m.channels[v].superop()
    return t.reshape(dout + dout + din + din)


def _build_network(m: CausalModel, open_edges: Iterable = (), fixed: Mapping[str, Hashable] | None = None) -> _Network:
    g = m.graph
    fixed = dict(fixed or {})
    open_edges = set(open_edges)
    labels: dict = {}

    def label(key) -> int:
        if key not in labels:
            labels[key] = len(labels)
        return labels[key]

    observed = [v for v in g.ids if g.is_observed(v)]

    def edge_letters(e, side: str) -> tuple[int, int]:
        u = e[0]
        if g.is_observed(u) and e not in open_edges:
            x = label(("x", u))
            return x, x
        if e in open_edges:
            return label((side, "r", e)), label((side, "c", e))
        return label(("r", e)), label(("c", e))

    operands, subs, owners = [], [], []
    for v in g.ids:
        ins = [edge_letters(e, "in") for e in m.in_order[v]]
        if g.is_observed(v):
            els = m.povms[v].elements  # (x, row, col)
            din = m.in_dims(v)
            # P[x, k..., l...] = E_x[l, k]
            arr = np.transpose(els, (0, 2, 1)).reshape([len(els)] + din + din)
            sub = [label(("x", v))] + [r for r, _ in ins] + [c for _, c in ins]
            if any(e in open_edges for e in m.out_order[v]):
                # open outputs carry |x><x| explicitly
                for e in m.out_order[v]:
                    if e not in open_edges:
                        continue
                    d = m.edge_dims[e]
                    proj = np.zeros((len(els), d, d))
                    for k, lab in enumerate(m.vertex_outcomes[v]):
                        proj[k, m.outcome_index(e, lab), m.outcome_index(e, lab)] = 1
                    r, c = edge_letters(e, "out")
                    operands.append(proj)
                    subs.append([label(("x", v)), r, c])
                    owners.append(v)
            operands.append(arr)
            subs.append(sub)
            owners.append(v)
        else:
            outs = [edge_letters(e, "out") for e in m.out_order[v]]
            arr = _vertex_tensor(m, v)
            sub = [r for r, _ in outs] + [c for _, c in outs] + [r for r, _ in ins] + [c for _, c in ins]
            operands.append(arr)
            subs.append(sub)
            owners.append(v)
    out = [labels[("x", v)] for v in observed if v not in fixed]
    open_rc = []
    for side in ("out", "in"):
        for e in g.edge_pairs:
            if e in open_edges:
                open_rc.append((side, "r", e))
        for e in g.edge_pairs:
            if e in open_edges:
                open_rc.append((side, "c", e))
    out += [labels[k] for k in open_rc]
    # fix observed outcomes by slicing their axes
    for v, value in fixed.items():
        lab = labels[("x", v)]
        k = m.vertex_outcomes[v].index(value)
        for i, (arr, sub) in enumerate(zip(operands, subs)):
            if lab in sub:
                idx = tuple(k if s == lab else slice(None) for s in sub)
                operands[i] = arr[idx]
                subs[i] = [s for s in sub if s != lab]
    variables = [(v, m.vertex_outcomes[v]) for v in observed if v not in fixed]
    if len(labels) > 52:
        raise DimensionError("network has more than 52 distinct indices; reduce the model size")
    return _Network(operands, subs, out, variables, owners)


def _declaration_order_path(net: _Network, m: CausalModel) -> list[tuple[int, ...]]:
    """Path that merges the operands touching each edge, in edge declaration order."""
    alive = [frozenset([v]) for v in net.owners]
    path: list[tuple[int, ...]] = []
    for u, v in m.graph.edge_pairs:
        pos = tuple(i for i, grp in enumerate(alive) if u in grp or v in grp)
        if len(pos) < 2:
            continue
        path.append(pos)
        merged = frozenset().union(*(alive[i] for i in pos))
        alive = [grp for i, grp in enumerate(alive) if i not in pos] + [merged]
    if len(alive) > 1:
        path.append(tuple(range(len(alive))))
    return path


def _contract(net: _Network, path: Sequence[tuple[int, ...]] | None) -> np.ndarray:
    args: list = []
    for arr, sub in zip(net.operands, net.subscripts):
        args.extend((arr, sub))
    args.append(net.output)
    if len(net.operands) == 1:
        return np.einsum(*args)
    opt = ["einsum_path", *path] if path else "greedy"
    return np.einsum(*args, optimize=opt)


def cycle_weights(
    m: CausalModel,
    threads: int = 1,
    check: bool = True,
    cap: int | None = None,
) -> tuple[list[tuple[str, tuple]], np.ndarray]:
    """``cycle(C_x)`` for every joint outcome ``x`` of the observed vertices.

    Computed on the maximal teleportation graph, where ``C_x`` is the tensor
    product of all mechanisms; returns the variables and a real array of
    weights indexed like the variables.
    """
    if check:
        ensure_valid(m)
    _check_dimension(m, cap)
    observed = m.observed
    if not observed:
        net = _build_network(m)
        val = _contract(net, _declaration_order_path(net, m))
        return [], np.asarray(_real(val)).reshape(())
    first = observed[0]
    slices = list(m.vertex_outcomes[first])

    def one(value) -> np.ndarray:
        net = _build_network(m, fixed={first: value})
        return np.asarray(_contract(net, _declaration_order_path(net, m)))

    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, slices))
    else:
        parts = [one(s) for s in slices]
    variables = [(v, m.vertex_outcomes[v]) for v in observed]
    return variables, _real(np.stack(parts, axis=0))


def _real(a) -> np.ndarray:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if np.abs(a.imag).max(initial=0.0) > _IMAG_TOL * scale:
            raise ModelError("network contraction produced a complex weight; the model is not physical")
        a = a.real
    return np.asarray(a, dtype=float)


def composed_map(m: CausalModel, tg: TeleportationGraph, x: Mapping[str, Hashable]) -> np.ndarray:
    """Transfer tensor of ``C_x`` for teleportation graph ``tg``.

    Kept edges are contracted; every split edge ``(u, v)`` contributes an open
    output leg on ``u``'s side (space A) and an open input leg on ``v``'s side
    (space C). Returned shape ``(dA, dA, dC, dC)`` with legs in split order.
    """
    split = [tg.base.edge_pairs[k] for k in tg.split]
    net = _build_network(m, open_edges=split, fixed=x)
    # re-order output legs to (A rows, A cols, C rows, C cols) in split order
    arr = _contract(net, None)
    d = [m.edge_dims[e] for e in split]
    da = int(np.prod(d)) if d else 1
    return np.asarray(arr, dtype=complex).reshape(da, da, da, da) if split else np.asarray(arr).reshape(1, 1, 1, 1)


# -- acyclic composition --------------------------------------------------------

def _schedule(m: CausalModel, fixed: Mapping[str, Hashable]) -> list[str]:
    """Topological order choosing, at each step, the vertex leaving the smallest state."""
    g = m.graph
    if not g.is_acyclic():
        raise GraphError("graph has a directed cycle; use cyclic_probability instead")
    indeg = {v: len(m.in_order[v]) for v in g.ids}
    live: set = set()
    batch = 1
    order = []
    remaining = set(g.ids)
    while remaining:
        ready = [v for v in remaining if indeg[v] == 0]
        best = None
        for v in ready:
            after = (live - set(m.in_order[v])) | set(m.out_order[v])
            size = int(np.prod([m.edge_dims[e] for e in after], dtype=object)) if after else 1
            grow = len(m.vertex_outcomes[v]) if g.is_observed(v) and v not in fixed else 1
            key = (size * size * batch * grow, g.index(v))
            if best is None or key < best[0]:
                best = (key, v, after, grow)
        _, v, after, grow = best
        order.append(v)
        live = after
        batch *= grow
        remaining.discard(v)
        for e in m.out_order[v]:
            indeg[e[1]] -= 1
    return order


def acyclic_weights(
    m: CausalModel,
    fixed: Mapping[str, Hashable] | None = None,
    check: bool = True,
) -> tuple[list[tuple[str, tuple]], np.ndarray]:
    """Unnormalized ``P_acyc(x, fixed)`` by composing mechanisms in topological order.

    The state is a batch of operators on the currently open edges, one per
    assignment of the observed vertices processed so far.
    """
    if check:
        ensure_valid(m)
    fixed = dict(fixed or {})
    g = m.graph
    order = _schedule(m, fixed)
    live: list = []
    dims: list[int] = []
    rho = np.ones((1,), dtype=complex)  # batch axis only
    batch_vars: list[str] = []
    for v in order:
        pos = [live.index(e) for e in m.in_order[v]]
        rest = [i for i in range(len(live)) if i not in pos]
        n = len(live)
        perm = [0] + [1 + i for i in pos + rest] + [1 + n + i for i in pos + rest]
        din = int(np.prod([dims[i] for i in pos])) if pos else 1
        rr = int(np.prod([dims[i] for i in rest])) if rest else 1
        b = rho.shape[0]
        r = rho.transpose(perm).reshape(b, din, rr, din, rr)
        outs = list(m.out_order[v])
        dout = m.out_dim(v)
        if g.is_observed(v):
            els = m.povms[v].elements
            labels = m.vertex_outcomes[v]
            picks = [labels.index(fixed[v])] if v in fixed else list(range(len(labels)))
            s = np.einsum("xji,birjc->bxrc", els[picks], r)
            kets = np.zeros((len(picks), dout))
            for n_k, k in enumerate(picks):
                flat = 0
                for e in outs:
                    flat = flat * m.edge_dims[e] + m.outcome_index(e, labels[k])
                kets[n_k, flat] = 1
            new = np.einsum("bxrc,xo,xp->bxorpc", s, kets, kets)
            new = new.reshape(b * len(picks), dout, rr, dout, rr)
            if v not in fixed:
                batch_vars.append(v)
        elif v in m.states:
            new = np.einsum("op,brc->borpc", m.states[v], r.reshape(b, rr, rr))
        else:
            k = m.channels[v].kraus
            new = np.einsum("aoi,birjc,apj->borpc", k, r, k.conj())
        live = outs + [live[i] for i in rest]
        dims = [m.edge_dims[e] for e in outs] + [dims[i] for i in rest]
        rho = new.reshape([new.shape[0]] + dims + dims)
    weights = _real(rho.reshape([len(m.vertex_outcomes[v]) for v in batch_vars]))
    declared = [v for v in g.observed if v not in fixed]
    weights = np.transpose(weights, [batch_vars.index(v) for v in declared]) if declared else weights
    return [(v, m.vertex_outcomes[v]) for v in declared], weights


def acyclic_probability(m: CausalModel, check: bool = True) -> Distribution:
    """``P_acyc(x)`` for a model on an acyclic graph."""
    if not m.graph.is_acyclic():
        raise GraphError("graph has a directed cycle; use cyclic_probability instead")
    variables, w = acyclic_weights(m, check=check)
    return Distribution(tuple(variables), w)


# -- cyclic rule ----------------------------------------------------------------

@dataclass(frozen=True)
class CyclicResult:
    """Outcome of the cyclic probability rule.

    ``weights[x] = cycle(C_x)``; ``success_prob = q_product * sum(weights)``;
    ``distribution`` is ``None`` for inconsistent models.
    """

    variables: tuple[tuple[str, tuple], ...]
    weights: np.ndarray = field(repr=False)
    success_prob: float
    q_product: float
    distribution: Distribution | None
    markov: bool
    tele_graph: TeleportationGraph | None = field(default=None, repr=False)

    @property
    def consistent(self) -> bool:
        return self.distribution is not None

    @property
    def cycle_total(self) -> float:
        return float(self.weights.sum())

    def require_distribution(self) -> Distribution:
        if self.distribution is None:
            raise InconsistentModelError("model is inconsistent: success probability is zero")
        return self.distribution


def _resolve_tg(g: CausalGraph, tg) -> TeleportationGraph:
    if tg is None or tg == "maximal":
        return maximal_teleportation_graph(g)
    if isinstance(tg, TeleportationGraph):
        return tg
    if tg == "all":
        return build_teleportation_graph(g, range(len(g.edges)))
    return build_teleportation_graph(g, tg)


def cyclic_probability(
    m: CausalModel,
    tg: TeleportationGraph | str | Iterable | None = "maximal",
    protocols: ProtocolChoice = "bell",
    route: str = "network",
    threads: int = 1,
    cap: int | None = None,
) -> CyclicResult:
    """Observed distribution of a (possibly cyclic) model.

    ``route="network"`` contracts the tensor network described in the module
    docstring; ``route="direct"`` runs the acyclic rule on the teleportation
    causal model for ``tg`` and conditions on every post-selection outcome
    being ``ok``; ``route="composed"`` builds each ``C_x`` along the kept
    edges of ``tg`` and takes its self-cycle.
    """
    ensure_valid(m)
    _check_dimension(m, cap)
    tele = _resolve_tg(m.graph, tg)
    protos = resolve_protocols(tele, m.edge_dims, protocols)
    qprod = float(np.prod([p.q for p in protos.values()]))
    if route == "network":
        variables, w = cycle_weights(m, threads=threads, check=False, cap=cap)
    elif route == "direct":
        tm = build_teleportation_model(m, tele, protos)
        variables, joint = acyclic_weights(tm.model, fixed={t: OK for t in tele.post_vertices}, check=False)
        w = joint / qprod
    elif route == "composed":
        variables = [(v, m.vertex_outcomes[v]) for v in m.observed]
        w = np.zeros([len(o) for _, o in variables])
        for idx in product(*(range(len(o)) for _, o in variables)):
            x = {v: o[k] for (v, o), k in zip(variables, idx)}
            w[idx] = _real(self_cycle(composed_map(m, tele, x)))
    else:
        raise ValueError(f"unknown route {route!r}")
    w = np.asarray(w, dtype=float)
    total = float(w.sum())
    dist = None
    if total >= INCONSISTENT_THRESHOLD:
        dist = Distribution(tuple(variables), w / total)
    markov = abs(total - 1) <= MARKOV_TOL
    return CyclicResult(tuple(variables), w, qprod * total, qprod, dist, markov, tele)


def markov_check(m: CausalModel, threads: int = 1) -> tuple[bool, float]:
    """Markov property: ``sum_x cycle(C_x) == 1`` on the maximal teleportation graph."""
    _, w = cycle_weights(m, threads=threads)
    total = float(w.sum())
    return abs(total - 1) <= MARKOV_TOL, total
