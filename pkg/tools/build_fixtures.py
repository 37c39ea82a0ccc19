"""Regenerate the bundled model documents in src/qcycle/fixtures/.

Run from the repository root: ``python tools/build_fixtures.py``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from qcycle.graph import CausalGraph
from qcycle.io import document_from_functional, document_from_model, dumps
from qcycle.model import CausalModel, FunctionalModel
from qcycle.tensor import KrausChannel

OUT = Path(__file__).resolve().parents[1] / "src" / "qcycle" / "fixtures"
Q, C, OBS, UNOBS = "quantum", "classical", "observed", "unobserved"


def proj(theta: float) -> np.ndarray:
    v = np.array([np.cos(theta), np.sin(theta)])
    return np.outer(v, v)


def bell() -> CausalModel:
    g = CausalGraph.build(
        [("S", UNOBS), "X", "Y", "A", "B"],
        [("S", "A", Q), ("S", "B", Q), ("X", "A"), ("Y", "B")],
    )
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)

    def measurement(angles):
        # input space: qubit (x) setting
        els = []
        for a in (0, 1):
            e = sum(np.kron(proj(t + a * np.pi / 2), np.diag(np.eye(2)[x])) for x, t in enumerate(angles))
            els.append(e)
        return els

    half = [np.array([[0.5]]), np.array([[0.5]])]
    return CausalModel.build(
        g,
        edge_dims={("S", "A"): 2, ("S", "B"): 2},
        states={"S": np.outer(phi, phi)},
        povms={"X": half, "Y": half, "A": measurement([0, np.pi / 4]), "B": measurement([np.pi / 8, 3 * np.pi / 8])},
    )


def prepare_measure() -> CausalModel:
    g = CausalGraph.build(["A", ("L", UNOBS), "B"], [("A", "L"), ("L", "B", C)])
    pa = [0.3, 0.7]
    pl_a = np.array([[0.9, 0.1], [0.2, 0.8]])  # [a, l]
    pb_l = np.array([[0.75, 0.25], [0.4, 0.6]])  # [l, b]
    kraus = []
    for a in range(2):
        for l in range(2):
            k = np.zeros((2, 2))
            k[l, a] = np.sqrt(pl_a[a, l])
            kraus.append(k)
    return CausalModel.build(
        g,
        edge_dims={("L", "B"): 2},
        povms={"A": [np.array([[p]]) for p in pa], "B": [np.diag(pb_l[:, b]) for b in range(2)]},
        channels={"L": KrausChannel.from_operators(kraus)},
    )


def selfloop(unitary: np.ndarray) -> CausalModel:
    g = CausalGraph.build([("L", UNOBS), "M"], [("L", "L", Q), ("L", "M", Q)])
    return CausalModel.build(
        g,
        edge_dims={("L", "L"): 2, ("L", "M"): 1},
        channels={"L": KrausChannel.from_operators([unitary])},
        povms={"M": [np.eye(1)]},
        vertex_outcomes={"M": ("done",)},
    )


def two_cycle() -> CausalModel:
    g = CausalGraph.build(
        ["X", "Y", ("L1", UNOBS), ("L2", UNOBS), "M", "N"],
        [("X", "L1"), ("Y", "L2"), ("L1", "L2", Q), ("L2", "L1", Q), ("L1", "M", Q), ("L2", "N", Q)],
    )

    def ry(t):
        return np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])

    # L1: (x, D) -> (A, E); rotate by theta_x then copy onto E
    copy = np.zeros((4, 2))
    copy[0, 0] = copy[3, 1] = 1
    k1 = [np.kron(np.eye(2)[x][None, :], copy @ ry(t)) for x, t in enumerate([0.0, np.pi / 3])]
    # L2: (y, A) -> (D, F); amplitude damping with gamma_y, the jump recorded on F
    k2 = []
    for y, gamma in enumerate([0.2, 0.7]):
        a0 = np.diag([1, np.sqrt(1 - gamma)])
        a1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
        k2.append(np.kron(np.eye(2)[y][None, :], np.kron(a0, np.eye(2)[:, [0]])))
        k2.append(np.kron(np.eye(2)[y][None, :], np.kron(a1, np.eye(2)[:, [1]])))
    return CausalModel.build(
        g,
        edge_dims={("L1", "L2"): 2, ("L2", "L1"): 2, ("L1", "M"): 2, ("L2", "N"): 2},
        povms={
            "X": [np.array([[0.6]]), np.array([[0.4]])],
            "Y": [np.array([[0.5]]), np.array([[0.5]])],
            "M": [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])],
            "N": [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])],
        },
        channels={"L1": KrausChannel.from_operators(k1), "L2": KrausChannel.from_operators(k2)},
    )


def functional(vertices, edges, outcomes, errors, priors, functions) -> FunctionalModel:
    g = CausalGraph.build(vertices, edges)
    return FunctionalModel(g, outcomes, errors, {k: np.asarray(v) for k, v in priors.items()}, functions)


def xor_loop() -> FunctionalModel:
    bit = (0, 1)
    return functional(
        ["v1", "v2", "v3", "v4"],
        [("v1", "v2"), ("v2", "v1"), ("v3", "v1"), ("v4", "v2")],
        {v: bit for v in ("v1", "v2", "v3", "v4")},
        {"v1": (0,), "v2": (0,), "v3": bit, "v4": bit},
        {"v1": [1.0], "v2": [1.0], "v3": [0.5, 0.5], "v4": [0.5, 0.5]},
        {
            # parents of v1 in source order: v2, v3
            "v1": {(a, b, 0): a ^ b for a in bit for b in bit},
            "v2": {(a, b, 0): a ^ b for a in bit for b in bit},
            "v3": {(u,): u for u in bit},
            "v4": {(u,): u for u in bit},
        },
    )


def chain() -> FunctionalModel:
    bit = (0, 1)
    return functional(
        ["A", "C", "B"],
        [("A", "C"), ("C", "B")],
        {v: bit for v in "ACB"},
        {"A": bit, "C": bit, "B": bit},
        {"A": [0.5, 0.5], "C": [0.9, 0.1], "B": [0.8, 0.2]},
        {
            "A": {(u,): u for u in bit},
            "C": {(a, u): a ^ u for a in bit for u in bit},
            "B": {(c, u): c ^ u for c in bit for u in bit},
        },
    )


def collider_desc() -> FunctionalModel:
    bit = (0, 1)
    return functional(
        ["A", "C", "B", "D"],
        [("A", "C"), ("B", "C"), ("C", "D")],
        {v: bit for v in "ACBD"},
        {"A": bit, "B": bit, "C": (0,), "D": (0,)},
        {"A": [0.5, 0.5], "B": [0.5, 0.5], "C": [1.0], "D": [1.0]},
        {
            "A": {(u,): u for u in bit},
            "B": {(u,): u for u in bit},
            "C": {(a, b, 0): a & b for a in bit for b in bit},
            "D": {(c, 0): c for c in bit},
        },
    )


def bad_povm() -> CausalModel:
    g = CausalGraph.build([("S", UNOBS), "M"], [("S", "M", Q)])
    return CausalModel.build(
        g,
        edge_dims={("S", "M"): 2},
        states={"S": np.diag([1.0, 0.0])},
        povms={"M": [np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])]},
    )


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    docs = {
        "bell.json": document_from_model(bell(), "bell", "Bell scenario at the Tsirelson settings with a maximally entangled source"),
        "prepare_measure.json": document_from_model(prepare_measure(), "prepare_measure", "classical prepare-and-measure A -> L -> B"),
        "identity_selfloop.json": document_from_model(selfloop(np.eye(2)), "identity_selfloop", "qubit self-loop through the identity channel"),
        "bitflip_selfloop.json": document_from_model(selfloop(np.array([[0, 1], [1, 0]])), "bitflip_selfloop", "qubit self-loop through a bit flip"),
        "two_cycle_inputs.json": document_from_model(two_cycle(), "two_cycle_inputs", "two latent channels in a loop, each with a classical input"),
        "dsep_cycle.json": document_from_functional(xor_loop(), "dsep_cycle", "v1 = v2 xor v3, v2 = v1 xor v4 with uniform v3, v4"),
        "chain.json": document_from_functional(chain(), "chain", "noisy copies A -> C -> B"),
        "collider_desc.json": document_from_functional(collider_desc(), "collider_desc", "collider A -> C <- B with descendant C -> D"),
        "bad_povm.json": document_from_model(bad_povm(), "bad_povm", "POVM with a negative element"),
    }
    for name, doc in docs.items():
        (OUT / name).write_text(dumps(doc), encoding="utf-8")
        print("wrote", name)


if __name__ == "__main__":
    main()
