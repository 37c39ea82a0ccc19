"""Causal models, post-selected teleportation protocols and functional models."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Hashable, Mapping, Sequence, Union

import numpy as np

from .errors import DimensionError, ModelError
from .graph import (
    CLASSICAL,
    OBSERVED,
    QUANTUM,
    UNOBSERVED,
    CausalGraph,
    Edge,
    TeleportationGraph,
    post_id,
    pre_id,
)
from .tensor import (
    COMPLETENESS_TOL,
    KrausChannel,
    Povm,
    ValidationReport,
    apply_channel,
    decohere,
    kron,
    max_entangled,
    partial_trace,
    validate_cptp,
    validate_povm,
    validate_state,
)

OK = "ok"
FAIL = "fail"


def _edge_name(e: Edge) -> str:
    return f"{e[0]}->{e[1]}"


@dataclass(frozen=True)
class CausalModel:
    """Mechanisms attached to a causal graph.

    ``states`` holds exogenous unobserved vertices, ``channels`` the other
    unobserved vertices, ``povms`` the observed ones. ``in_order``/``out_order``
    fix the tensor-factor order of each vertex's input/output space.
    """

    graph: CausalGraph
    edge_dims: Mapping[Edge, int]
    edge_outcomes: Mapping[Edge, tuple]
    vertex_outcomes: Mapping[str, tuple]
    channels: Mapping[str, KrausChannel]
    states: Mapping[str, np.ndarray]
    povms: Mapping[str, Povm]
    in_order: Mapping[str, tuple[Edge, ...]]
    out_order: Mapping[str, tuple[Edge, ...]]

    @classmethod
    def build(
        cls,
        graph: CausalGraph,
        *,
        edge_dims: Mapping[Edge, int] | None = None,
        edge_outcomes: Mapping[Edge, Sequence] | None = None,
        vertex_outcomes: Mapping[str, Sequence] | None = None,
        channels: Mapping[str, KrausChannel] | None = None,
        states: Mapping[str, np.ndarray] | None = None,
        povms: Mapping[str, Povm | Sequence] | None = None,
        in_order: Mapping[str, Sequence[Edge]] | None = None,
        out_order: Mapping[str, Sequence[Edge]] | None = None,
    ) -> "CausalModel":
        """Fill in defaults.

        Classical edges leaving observed vertices inherit the vertex outcomes;
        other classical edges default to labels ``0..d-1``. POVMs default to
        labels ``0..n-1``. A channel on an exogenous unobserved vertex is turned
        into the state it prepares.
        """
        edge_dims = {tuple(k): int(v) for k, v in (edge_dims or {}).items()}
        edge_outcomes = {tuple(k): tuple(v) for k, v in (edge_outcomes or {}).items()}
        vertex_outcomes = {k: tuple(v) for k, v in (vertex_outcomes or {}).items()}
        povms = {k: (p if isinstance(p, Povm) else Povm.from_elements(p)) for k, p in (povms or {}).items()}
        channels = dict(channels or {})
        states = {k: np.asarray(v, dtype=complex) for k, v in (states or {}).items()}
        for v, p in povms.items():
            vertex_outcomes.setdefault(v, tuple(range(len(p))))
        for u, v, kind in graph.edges:
            e = (u, v)
            if kind != CLASSICAL:
                continue
            if e not in edge_outcomes:
                if graph.is_observed(u) and u in vertex_outcomes:
                    edge_outcomes[e] = vertex_outcomes[u]
                elif e in edge_dims:
                    edge_outcomes[e] = tuple(range(edge_dims[e]))
            if e not in edge_dims and e in edge_outcomes:
                edge_dims[e] = len(edge_outcomes[e])
        for v in list(channels):
            if v in graph._index and not graph.in_edges(v) and channels[v].in_dim == 1:
                ch = channels.pop(v)
                states[v] = apply_channel(ch, np.ones((1, 1)))
        ins = {v: tuple(tuple(e) for e in (in_order or {}).get(v, graph.in_edges(v))) for v in graph.ids}
        outs = {v: tuple(tuple(e) for e in (out_order or {}).get(v, graph.out_edges(v))) for v in graph.ids}
        return cls(graph, edge_dims, edge_outcomes, vertex_outcomes, channels, states, povms, ins, outs)

    def in_dims(self, v: str) -> list[int]:
        return [self.edge_dims[e] for e in self.in_order[v]]

    def out_dims(self, v: str) -> list[int]:
        return [self.edge_dims[e] for e in self.out_order[v]]

    def in_dim(self, v: str) -> int:
        return int(np.prod(self.in_dims(v))) if self.in_order[v] else 1

    def out_dim(self, v: str) -> int:
        return int(np.prod(self.out_dims(v))) if self.out_order[v] else 1

    @property
    def observed(self) -> list[str]:
        return self.graph.observed

    def outcome_index(self, e: Edge, label: Hashable) -> int:
        return self.edge_outcomes[e].index(label)

    def channel_of(self, v: str) -> KrausChannel:
        """Kraus form of an unobserved vertex's mechanism (states as preparations)."""
        if v in self.channels:
            return self.channels[v]
        return KrausChannel.from_state(self.states[v])

    def observed_event_map(self, v: str, x: Hashable) -> np.ndarray:
        """Transfer tensor of ``M_x(rho) = Tr[E_x rho] |x><x|`` on every out-edge.

        Shape ``(out, out, in, in)`` with ``M(|k><l|) = sum T[i,j,k,l] |i><j|``.
        """
        k = self.vertex_outcomes[v].index(x)
        e_x = self.povms[v].elements[k]
        ket = np.zeros(self.out_dim(v))
        flat = 0
        for e in self.out_order[v]:
            flat = flat * self.edge_dims[e] + self.outcome_index(e, x)
        ket[flat] = 1
        proj = np.outer(ket, ket)
        return np.einsum("ij,lk->ijkl", proj, e_x)

    def total_dimension(self) -> int:
        return int(np.prod([self.edge_dims.get(e, 1) for e in self.graph.edge_pairs], dtype=object))


def _decoherence_deviation(m: CausalModel, v: str, ch: KrausChannel) -> float:
    outs = m.out_order[v]
    targets = [i for i, e in enumerate(outs) if m.graph.edge_kind(e) == CLASSICAL]
    if not targets:
        return 0.0
    dims = m.out_dims(v)
    worst = 0.0
    for k in range(ch.in_dim):
        for l in range(ch.in_dim):
            unit = np.zeros((ch.in_dim, ch.in_dim), dtype=complex)
            unit[k, l] = 1
            out = apply_channel(ch, unit)
            worst = max(worst, float(np.abs(decohere(out, dims, targets) - out).max()))
    return worst


def validate_model(m: CausalModel, tol: float = COMPLETENESS_TOL) -> ValidationReport:
    """Check every structural and numerical requirement; failures carry locations."""
    rep = ValidationReport()
    g = m.graph
    for u, v, kind in g.edges:
        e = (u, v)
        loc = f"edge {_edge_name(e)}"
        if e not in m.edge_dims:
            rep.fail(loc, "missing dimension")
            continue
        if m.edge_dims[e] < 1:
            rep.fail(loc, f"dimension {m.edge_dims[e]} is not positive")
        if kind == CLASSICAL:
            outs = m.edge_outcomes.get(e)
            if outs is None:
                rep.fail(loc, "classical edge has no outcome set")
                continue
            if len(outs) != m.edge_dims[e]:
                rep.fail(loc, f"outcome set of size {len(outs)} does not match dimension {m.edge_dims[e]}")
            if len(set(outs)) != len(outs):
                rep.fail(loc, "outcome labels repeat")
            if g.is_observed(u) and tuple(outs) != tuple(m.vertex_outcomes.get(u, ())):
                rep.fail(loc, f"outcome set {list(outs)} does not match outcomes of observed vertex {u!r}")
    for e in m.edge_dims:
        if tuple(e) not in set(g.edge_pairs):
            rep.fail(f"edge {_edge_name(e)}", "dimension given for an undeclared edge")
    if not rep.ok:
        return rep
    known = set(g.ids)
    for table, what in ((m.channels, "channel"), (m.states, "state"), (m.povms, "POVM")):
        for v in table:
            if v not in known:
                rep.fail(f"vertex {v}", f"{what} given for an undeclared vertex")
    for v in g.ids:
        loc = f"vertex {v}"
        if sorted(m.in_order[v]) != sorted(g.in_edges(v)):
            rep.fail(loc, "in-edge ordering is not a permutation of the in-edges")
            continue
        if sorted(m.out_order[v]) != sorted(g.out_edges(v)):
            rep.fail(loc, "out-edge ordering is not a permutation of the out-edges")
            continue
        din, dout = m.in_dim(v), m.out_dim(v)
        if g.is_observed(v):
            if v in m.channels or v in m.states:
                rep.fail(loc, "observed vertex carries a channel; observed vertices take a POVM")
            p = m.povms.get(v)
            if p is None:
                rep.fail(loc, "observed vertex has no POVM")
                continue
            outs = m.vertex_outcomes.get(v, ())
            if len(outs) != len(p):
                rep.fail(loc, f"{len(p)} POVM elements for {len(outs)} outcomes")
            if len(set(outs)) != len(outs):
                rep.fail(loc, "outcome labels repeat")
            if p.dim != din:
                rep.fail(loc, f"POVM acts on dimension {p.dim}, in-edges give {din}")
                continue
            rep.merge(validate_povm(p, tol, where=f"{loc} POVM"))
            continue
        if v in m.povms:
            rep.fail(loc, "unobserved vertex carries a POVM")
        if v in m.states:
            if g.in_edges(v):
                rep.fail(loc, "vertex with parents must carry a channel, not a state")
                continue
            rho = m.states[v]
            if rho.shape != (dout, dout):
                rep.fail(loc, f"state has shape {rho.shape}, out-edges give {dout}")
                continue
            rep.merge(validate_state(rho, tol, where=f"{loc} state"))
            ch = KrausChannel.from_state(rho) if validate_state(rho, tol).ok else None
        elif v in m.channels:
            ch = m.channels[v]
            if (ch.in_dim, ch.out_dim) != (din, dout):
                rep.fail(loc, f"channel maps {ch.in_dim}->{ch.out_dim}, edges give {din}->{dout}")
                continue
            r = validate_cptp(ch, tol, where=f"{loc} channel")
            rep.merge(r)
            if not r.ok:
                continue
        else:
            rep.fail(loc, "unobserved vertex has no channel or state")
            continue
        if ch is not None:
            dev = _decoherence_deviation(m, v, ch)
            if dev > tol:
                rep.fail(loc, f"output on classical out-edges is not decohered (deviation {dev:.3g})")
    return rep


def ensure_valid(m: CausalModel) -> None:
    rep = validate_model(m)
    if not rep.ok:
        raise ModelError("; ".join(f"{i.location}: {i.message}" for i in rep.issues))


# -- post-selected teleportation -------------------------------------------------

@dataclass(frozen=True)
class TeleProtocol:
    """Effect ``E`` on A(x)B and state ``tau`` on B(x)C (C has the dimension of A)."""

    dim_A: int
    dim_B: int
    post_element: np.ndarray = field(repr=False)
    pre_state: np.ndarray = field(repr=False)
    q: float = 0.0

    def __post_init__(self) -> None:
        e = np.asarray(self.post_element, dtype=complex)
        t = np.asarray(self.pre_state, dtype=complex)
        d = self.dim_A * self.dim_B
        if e.shape != (d, d) or t.shape != (d, d):
            raise DimensionError(f"protocol operators must be {d}x{d}")
        object.__setattr__(self, "post_element", e)
        object.__setattr__(self, "pre_state", t)

    @classmethod
    def from_operators(cls, post_element, pre_state, dim_A: int, tol: float = 1e-9) -> "TeleProtocol":
        """Build a protocol and read off ``q`` via :func:`verify_protocol`."""
        e = np.asarray(post_element, dtype=complex)
        dim_B = e.shape[0] // dim_A
        p = cls(dim_A, dim_B, e, pre_state, 0.0)
        rep = verify_protocol(p, tol)
        if not rep.ok:
            raise ModelError("not a post-selected teleportation protocol: " + "; ".join(i.message for i in rep.issues))
        return cls(dim_A, dim_B, e, pre_state, rep.extra["q"])


def teleport(p: TeleProtocol, rho: np.ndarray) -> np.ndarray:
    """``Tr_AB[E_AB (rho_A (x) tau_BC)]`` as an operator on C."""
    da, db = p.dim_A, p.dim_B
    joint = kron(rho, p.pre_state)
    full = kron(p.post_element, np.eye(da)) @ joint
    return partial_trace(full, [da, db, da], [0, 1])


def bell_protocol(d: int) -> TeleProtocol:
    phi = max_entangled(d)
    proj = np.outer(phi, phi.conj())
    return TeleProtocol(d, d, proj, proj.copy(), 1.0 / d**2)


def self_test_protocol(
    lambdas: Sequence[float],
    q: float | None = None,
    basis_a: np.ndarray | None = None,
    basis_b: np.ndarray | None = None,
    dim_B: int | None = None,
) -> TeleProtocol:
    """Protocol with ``|tau> = sum_k l_k |b_k>|a_k>`` and ``E = |E><E|``,
    ``|E> = sqrt(q) sum_k |a_k>|b_k> / l_k``.

    ``basis_a`` columns give the A/C basis, ``basis_b`` columns an orthonormal
    set in B (``dim_B >= len(lambdas)``). ``q`` defaults to its largest
    admissible value ``1 / sum_k l_k^-2``.
    """
    lam = np.asarray(lambdas, dtype=float)
    da = len(lam)
    db = dim_B or da
    if db < da:
        raise DimensionError("B must be at least as large as A")
    if np.any(lam == 0) or abs(np.sum(lam**2) - 1) > 1e-12:
        raise ValueError("coefficients must be non-zero with unit square norm")
    qmax = 1.0 / np.sum(1.0 / lam**2)
    q = qmax if q is None else float(q)
    if q <= 0 or q > qmax * (1 + 1e-12):
        raise ValueError(f"q must lie in (0, {qmax:.12g}]")
    a = np.eye(da, dtype=complex) if basis_a is None else np.asarray(basis_a, dtype=complex)
    b = np.eye(db, da, dtype=complex) if basis_b is None else np.asarray(basis_b, dtype=complex)
    tau_vec = sum(lam[k] * np.kron(b[:, k], a[:, k]) for k in range(da))
    e_vec = np.sqrt(q) * sum(np.kron(a[:, k], b[:, k]) / lam[k] for k in range(da))
    return TeleProtocol(da, db, np.outer(e_vec, e_vec.conj()), np.outer(tau_vec, tau_vec.conj()), q)


def verify_protocol(p: TeleProtocol, tol: float = 1e-9) -> ValidationReport:
    """Check the teleportation condition on every matrix unit and extract ``q``."""
    rep = ValidationReport()
    d = p.dim_A
    e = p.post_element
    herm = float(np.abs(e - e.conj().T).max())
    if herm > tol:
        rep.fail("post_element", f"not Hermitian (deviation {herm:.3g})")
    else:
        w = np.linalg.eigvalsh((e + e.conj().T) / 2)
        if w.min() < -tol or w.max() > 1 + tol:
            rep.fail("post_element", f"eigenvalues [{w.min():.3g}, {w.max():.3g}] leave [0, 1]")
    rep.merge(validate_state(p.pre_state, tol, where="pre_state"))
    q = float(np.real(np.trace(teleport(p, np.eye(d) / d))))
    rep.extra["q"] = q
    worst = 0.0
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1
            worst = max(worst, float(np.abs(teleport(p, unit) - q * unit).max()))
    rep.deviation = worst
    if worst > tol:
        rep.fail("condition", f"output is not proportional to the input (deviation {worst:.3g})")
    if q <= tol:
        rep.fail("q", f"success probability {q:.3g} is not positive")
    if q > 1.0 / d**2 + tol:
        rep.fail("q", f"success probability {q:.12g} exceeds 1/d^2 = {1.0 / d**2:.12g}")
    if p.q and abs(p.q - q) > tol:
        rep.fail("q", f"declared q = {p.q:.12g} but the condition gives {q:.12g}")
    return rep


ProtocolChoice = Union[str, TeleProtocol, Mapping, Callable[[int], TeleProtocol], None]


def resolve_protocols(tg: TeleportationGraph, dims: Mapping[Edge, int], choice: ProtocolChoice) -> dict[int, TeleProtocol]:
    """One protocol per split-edge index; unspecified edges use the Bell protocol."""
    out = {}
    for k in tg.split:
        e = tg.base.edge_pairs[k]
        d = dims[e]
        p = None
        if isinstance(choice, TeleProtocol):
            p = choice
        elif isinstance(choice, Mapping):
            p = choice.get(k, choice.get(e))
        elif callable(choice):
            p = choice(d)
        elif choice not in (None, "bell"):
            raise ValueError(f"unknown protocol choice {choice!r}")
        p = p or bell_protocol(d)
        if p.dim_A != d:
            raise DimensionError(f"protocol for edge {_edge_name(e)} has dimension {p.dim_A}, edge has {d}")
        out[k] = p
    return out


@dataclass(frozen=True)
class TeleportationCausalModel:
    tele_graph: TeleportationGraph
    model: CausalModel
    protocols: Mapping[int, TeleProtocol]

    @property
    def q_product(self) -> float:
        return float(np.prod([p.q for p in self.protocols.values()]))


def build_teleportation_model(m: CausalModel, tg: TeleportationGraph, protocols: ProtocolChoice = "bell") -> TeleportationCausalModel:
    """Acyclic model on ``tg.derived`` reusing ``m``'s mechanisms.

    Split edge ``k = (u, v)`` becomes ``u -> T#k`` (same kind and space),
    ``R#k -> T#k`` (space B) and ``R#k -> v`` (same space), with ``T#k``
    measuring ``{E, 1 - E}`` and ``R#k`` preparing ``tau``.
    """
    if tg.base != m.graph:
        raise ModelError("teleportation graph was built from a different graph")
    protos = resolve_protocols(tg, m.edge_dims, protocols)
    dims = dict(m.edge_dims)
    outs = dict(m.edge_outcomes)
    in_order = {v: list(m.in_order[v]) for v in m.graph.ids}
    out_order = {v: list(m.out_order[v]) for v in m.graph.ids}
    povms = dict(m.povms)
    states = dict(m.states)
    vertex_outcomes = dict(m.vertex_outcomes)
    for k in tg.split:
        u, v = tg.base.edge_pairs[k]
        e = (u, v)
        r, t = pre_id(k), post_id(k)
        p = protos[k]
        ut, rt, rv = (u, t), (r, t), (r, v)
        dims[ut] = dims[rv] = dims.pop(e)
        dims[rt] = p.dim_B
        if e in outs:
            outs[ut] = outs.pop(e)
        out_order[u] = [ut if x == e else x for x in out_order[u]]
        in_order[v] = [rv if x == e else x for x in in_order[v]]
        in_order[t] = [ut, rt]
        out_order[t] = []
        in_order[r] = []
        out_order[r] = [rt, rv]
        povms[t] = Povm(p.dim_A * p.dim_B, np.stack([p.post_element, np.eye(p.dim_A * p.dim_B) - p.post_element]))
        vertex_outcomes[t] = (OK, FAIL)
        states[r] = p.pre_state
    model = CausalModel(
        tg.derived, dims, outs, vertex_outcomes, dict(m.channels), states, povms,
        {v: tuple(x) for v, x in in_order.items()}, {v: tuple(x) for v, x in out_order.items()},
    )
    return TeleportationCausalModel(tg, model, protos)


# -- functional models ----------------------------------------------------------

@dataclass(frozen=True)
class FunctionalModel:
    """Classical model ``x_v = f_v(x_pa(v), u_v)`` with independent finite errors.

    Parents are ordered by :meth:`CausalGraph.in_edges`; ``functions[v]`` maps
    ``(parent values..., error value)`` to an outcome of ``v``.
    """

    graph: CausalGraph
    outcomes: Mapping[str, tuple]
    errors: Mapping[str, tuple]
    priors: Mapping[str, np.ndarray]
    functions: Mapping[str, Mapping[tuple, Hashable]]

    def parents_of(self, v: str) -> list[str]:
        return [u for u, _ in self.graph.in_edges(v)]

    def validate(self) -> ValidationReport:
        rep = ValidationReport()
        g = self.graph
        for v, kind in g.vertices:
            if kind != OBSERVED:
                rep.fail(f"vertex {v}", "functional models have observed vertices only")
        for u, w, kind in g.edges:
            if kind != CLASSICAL:
                rep.fail(f"edge {u}->{w}", "functional models have classical edges only")
        for v in g.ids:
            loc = f"vertex {v}"
            if v not in self.outcomes or v not in self.errors or v not in self.priors or v not in self.functions:
                rep.fail(loc, "missing outcomes, errors, prior or function table")
                continue
            prior = np.asarray(self.priors[v], dtype=float)
            if prior.shape != (len(self.errors[v]),):
                rep.fail(loc, "prior length differs from the number of error values")
                continue
            if prior.min() < 0 or abs(prior.sum() - 1) > 1e-12:
                rep.fail(loc, "prior must be non-negative and sum to 1")
            table = self.functions[v]
            domain = [self.outcomes[u] for u in self.parents_of(v)] + [self.errors[v]]
            for key in product(*domain):
                if key not in table:
                    rep.fail(loc, f"function table has no row for inputs {list(key)}")
                    break
                if table[key] not in self.outcomes[v]:
                    rep.fail(loc, f"output {table[key]!r} is not an outcome of {v!r}")
                    break
            arity = len(domain)
            if any(len(k) != arity for k in table):
                rep.fail(loc, f"function table rows must have {arity} inputs")
        return rep


def embed_functional_model(f: FunctionalModel) -> CausalModel:
    """All-observed, all-classical causal model with ``E_x = Tr_U[E^f_x (1 (x) sigma)]``."""
    rep = f.validate()
    if not rep.ok:
        raise ModelError("; ".join(f"{i.location}: {i.message}" for i in rep.issues))
    g = f.graph
    povms = {}
    for v in g.ids:
        pars = f.parents_of(v)
        pdims = [len(f.outcomes[u]) for u in pars]
        nu = len(f.errors[v])
        dp = int(np.prod(pdims)) if pdims else 1
        sigma = np.diag(np.asarray(f.priors[v], dtype=float)).astype(complex)
        els = []
        for x in f.outcomes[v]:
            ef = np.zeros((dp * nu, dp * nu), dtype=complex)
            for flat, key in enumerate(product(*[f.outcomes[u] for u in pars], f.errors[v])):
                if f.functions[v][key] == x:
                    ef[flat, flat] = 1
            absorbed = ef @ kron(np.eye(dp), sigma)
            els.append(partial_trace(absorbed, [dp, nu], [1]))
        povms[v] = Povm(dp, np.asarray(els))
    edge_outcomes = {(u, w): f.outcomes[u] for u, w, _ in g.edges}
    return CausalModel.build(
        g,
        edge_outcomes=edge_outcomes,
        vertex_outcomes={v: f.outcomes[v] for v in g.ids},
        povms=povms,
    )


__all__ = [
    "CausalModel",
    "FunctionalModel",
    "TeleProtocol",
    "TeleportationCausalModel",
    "bell_protocol",
    "build_teleportation_model",
    "embed_functional_model",
    "ensure_valid",
    "resolve_protocols",
    "self_test_protocol",
    "teleport",
    "validate_model",
    "verify_protocol",
    "QUANTUM",
    "UNOBSERVED",
]
