import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcycle.errors import DimensionError, ModelError
from qcycle.graph import CLASSICAL, QUANTUM, UNOBSERVED, CausalGraph, build_teleportation_graph, post_id, pre_id
from qcycle.io import load
from qcycle.model import (
    FAIL,
    OK,
    CausalModel,
    FunctionalModel,
    TeleProtocol,
    bell_protocol,
    build_teleportation_model,
    embed_functional_model,
    self_test_protocol,
    teleport,
    validate_model,
    verify_protocol,
)
from qcycle.tensor import KrausChannel

from randmodels import random_functional, random_graph, random_model, random_self_test_protocol

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def messages(rep):
    return [f"{i.location}: {i.message}" for i in rep.issues]


def prepare_measure(channel=None, kind=CLASSICAL):
    """A -> L -> B with L unobserved."""
    g = CausalGraph.build(["A", ("L", UNOBSERVED), "B"], [("A", "L"), ("L", "B", kind)])
    if channel is None:
        ops = [np.kron(np.eye(2)[a][None, :], np.outer(np.eye(2)[:, a], [1.0])) for a in range(2)]
        channel = KrausChannel.from_operators(ops)
    return CausalModel.build(
        g,
        edge_dims={("L", "B"): 2},
        povms={"A": [np.array([[0.3]]), np.array([[0.7]])], "B": [np.diag([1.0, 0]), np.diag([0, 1.0])]},
        channels={"L": channel},
    )


class TestValidateModel:
    def test_bell_fixture_passes(self, fixture_path):
        rep = validate_model(load(fixture_path("bell")).causal_model())
        assert rep.ok, messages(rep)

    def test_prepare_measure_passes(self):
        assert validate_model(prepare_measure()).ok

    def test_outcome_mismatch_names_the_edge(self):
        m = prepare_measure()
        bad = CausalModel(
            m.graph, m.edge_dims, {**m.edge_outcomes, ("A", "L"): ("a", "b")}, m.vertex_outcomes,
            m.channels, m.states, m.povms, m.in_order, m.out_order,
        )
        rep = validate_model(bad)
        assert not rep.ok
        assert any(i.location == "edge A->L" and "does not match outcomes" in i.message for i in rep.issues)

    def test_hadamard_on_classical_edge_fails_decoherence(self):
        # |a> -> H|a> creates coherence on the classical edge L->B
        ops = [np.kron(np.eye(2)[a][None, :], H[:, [a]]) for a in range(2)]
        rep = validate_model(prepare_measure(KrausChannel.from_operators(ops)))
        assert any("not decohered" in i.message and i.location == "vertex L" for i in rep.issues)

    def test_hadamard_on_quantum_edge_is_fine(self):
        ops = [np.kron(np.eye(2)[a][None, :], H[:, [a]]) for a in range(2)]
        assert validate_model(prepare_measure(KrausChannel.from_operators(ops), kind=QUANTUM)).ok

    def test_non_psd_povm_names_the_vertex(self, fixture_path):
        rep = validate_model(load(fixture_path("bad_povm")).causal_model())
        assert not rep.ok
        assert any(i.location.startswith("vertex M") for i in rep.issues)

    def test_channel_dimension_mismatch(self):
        rep = validate_model(prepare_measure(KrausChannel.identity(3)))
        assert "vertex L: channel maps 3->3, edges give 2->2" in messages(rep)

    def test_missing_mechanism(self):
        g = CausalGraph.build([("L", UNOBSERVED), "B"], [("L", "B", QUANTUM)])
        m = CausalModel.build(g, edge_dims={("L", "B"): 2}, povms={"B": [np.eye(2)]})
        assert any("no channel or state" in x for x in messages(validate_model(m)))

    def test_observed_vertex_with_wrong_povm_dimension(self):
        g = CausalGraph.build([("L", UNOBSERVED), "B"], [("L", "B", QUANTUM)])
        m = CausalModel.build(
            g, edge_dims={("L", "B"): 2}, states={"L": np.eye(2) / 2}, povms={"B": [np.eye(3)]},
        )
        assert any("POVM acts on dimension 3" in x for x in messages(validate_model(m)))

    def test_exogenous_channel_becomes_state(self):
        g = CausalGraph.build([("S", UNOBSERVED), "B"], [("S", "B", QUANTUM)])
        plus = KrausChannel.from_operators([np.array([[1.0], [1.0]]) / np.sqrt(2)])
        m = CausalModel.build(g, edge_dims={("S", "B"): 2}, channels={"S": plus}, povms={"B": [np.eye(2)]})
        assert "S" not in m.channels
        assert np.allclose(m.states["S"], np.full((2, 2), 0.5))
        assert validate_model(m).ok

    def test_random_models_validate(self, rng):
        for _ in range(30):
            g = random_graph(rng, int(rng.integers(1, 5)), 5)
            rep = validate_model(random_model(rng, g))
            assert rep.ok, messages(rep)


class TestObservedEventMap:
    def test_outputs_are_diagonal_and_sum_to_trace_preserving(self, rng):
        g = CausalGraph.build(["A", "B", "C"], [("A", "B"), ("A", "C")])
        m = CausalModel.build(g, povms={"A": [np.array([[0.25]]), np.array([[0.75]])], "B": [np.eye(2)], "C": [np.eye(2)]})
        total = sum(m.observed_event_map("A", x) for x in m.vertex_outcomes["A"])
        out = np.einsum("ijkl,lk->ij", total, np.ones((1, 1)))
        assert np.isclose(np.trace(out), 1.0)
        for x in m.vertex_outcomes["A"]:
            t = m.observed_event_map("A", x).reshape(4, 4)
            assert np.allclose(t - np.diag(np.diag(t)), 0)


class TestBellProtocol:
    @pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
    def test_verifies_with_inverse_square_q(self, d):
        rep = verify_protocol(bell_protocol(d))
        assert rep.ok, messages(rep)
        assert abs(rep.extra["q"] - 1 / d**2) <= 1e-12

    def test_trivial_dimension(self):
        p = bell_protocol(1)
        assert p.q == 1.0
        assert np.allclose(p.post_element, [[1]]) and np.allclose(p.pre_state, [[1]])

    def test_qubit_q(self):
        assert bell_protocol(2).q == 0.25


class TestVerifyProtocol:
    def test_self_test_form(self):
        p = self_test_protocol([np.sqrt(0.8), np.sqrt(0.2)])
        rep = verify_protocol(p)
        assert rep.ok, messages(rep)
        assert abs(rep.extra["q"] - 0.16) <= 1e-12

    def test_identity_effect_with_mixed_state_fails(self):
        d = 2
        p = TeleProtocol(d, d, np.eye(d * d), np.eye(d * d) / d**2, 0.0)
        rep = verify_protocol(p)
        assert not rep.ok
        assert any(i.location == "condition" for i in rep.issues)

    def test_from_operators_rejects_bad_pair(self):
        with pytest.raises(ModelError):
            TeleProtocol.from_operators(np.eye(4), np.eye(4) / 4, dim_A=2)

    def test_from_operators_reads_q(self):
        b = bell_protocol(3)
        p = TeleProtocol.from_operators(b.post_element, b.pre_state, dim_A=3)
        assert abs(p.q - 1 / 9) <= 1e-12

    def test_declared_q_is_checked(self):
        b = bell_protocol(2)
        p = TeleProtocol(2, 2, b.post_element, b.pre_state, 0.2)
        assert any(i.location == "q" for i in verify_protocol(p).issues)

    def test_q_above_bound_is_rejected(self):
        with pytest.raises(ValueError):
            self_test_protocol([np.sqrt(0.5), np.sqrt(0.5)], q=0.3)

    def test_larger_b_space(self, rng):
        p = random_self_test_protocol(rng, 2, extra_b=2)
        assert p.dim_B == 4
        assert verify_protocol(p).ok

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 2), st.integers(0, 2**32 - 1))
    def test_q_does_not_depend_on_the_input(self, d, extra, seed):
        rng = np.random.default_rng(seed)
        p = random_self_test_protocol(rng, d, extra)
        rep = verify_protocol(p)
        assert rep.ok, messages(rep)
        assert rep.extra["q"] <= 1 / d**2 + 1e-12
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        rho = np.outer(v, v.conj()) / np.vdot(v, v)
        out = teleport(p, rho)
        assert abs(np.trace(out).real - rep.extra["q"]) <= 1e-9
        assert np.abs(out - rep.extra["q"] * rho).max() <= 1e-9


class TestTeleportationModel:
    def self_loop(self):
        g = CausalGraph.build([("L", UNOBSERVED), "M"], [("L", "L", QUANTUM), ("L", "M", QUANTUM)])
        return CausalModel.build(
            g, edge_dims={("L", "L"): 2, ("L", "M"): 1},
            channels={"L": KrausChannel(2, 2, np.eye(2)[None])}, povms={"M": [np.eye(1)]},
        )

    def test_acyclic_keep_all_is_unchanged(self):
        m = prepare_measure()
        tg = build_teleportation_graph(m.graph, range(len(m.graph.edges)))
        tm = build_teleportation_model(m, tg)
        assert tm.model.graph == m.graph
        assert tm.protocols == {}
        assert tm.q_product == 1.0

    def test_self_loop_gadget(self):
        m = self.self_loop()
        tg = build_teleportation_graph(m.graph, [("L", "M")])
        tm = build_teleportation_model(m, tg)
        r, t = pre_id(0), post_id(0)
        mm = tm.model
        assert mm.graph.is_acyclic()
        assert mm.vertex_outcomes[t] == (OK, FAIL)
        assert np.allclose(mm.states[r], bell_protocol(2).pre_state)
        assert mm.in_order[t] == (("L", t), (r, t))
        assert mm.in_order["L"] == ((r, "L"),)
        assert abs(tm.q_product - 0.25) <= 1e-15
        assert validate_model(mm).ok

    def test_every_kept_set_validates(self, rng):
        g = random_graph(rng, 3, 4, acyclic=False)
        m = random_model(rng, g)
        from qcycle.graph import enumerate_acyclic_edge_subsets

        for kept in enumerate_acyclic_edge_subsets(g):
            tm = build_teleportation_model(m, build_teleportation_graph(g, kept))
            assert validate_model(tm.model).ok

    def test_protocol_dimension_mismatch(self):
        m = self.self_loop()
        tg = build_teleportation_graph(m.graph, [("L", "M")])
        with pytest.raises(DimensionError):
            build_teleportation_model(m, tg, bell_protocol(3))

    def test_foreign_graph(self):
        m = self.self_loop()
        tg = build_teleportation_graph(prepare_measure().graph, [])
        with pytest.raises(ModelError):
            build_teleportation_model(m, tg)


class TestFunctionalEmbedding:
    def xor_vertex(self):
        bit = (0, 1)
        g = CausalGraph.build(["a", "b", "c"], [("a", "c"), ("b", "c")])
        return FunctionalModel(
            g,
            {v: bit for v in "abc"},
            {v: (0,) for v in "abc"},
            {v: np.array([1.0]) for v in "abc"},
            {"a": {(0,): 0}, "b": {(0,): 1}, "c": {(x, y, 0): x ^ y for x in bit for y in bit}},
        )

    def test_constant_source_is_a_point_distribution(self):
        els = embed_functional_model(self.xor_vertex()).povms["a"].elements
        assert np.allclose(els[:, 0, 0], [1.0, 0.0])

    def test_xor_elements_are_pairs_of_projectors(self):
        els = embed_functional_model(self.xor_vertex()).povms["c"].elements
        # inputs (a, b) flattened row-major: 00, 01, 10, 11
        assert np.allclose(els[0], np.diag([1, 0, 0, 1]))
        assert np.allclose(els[1], np.diag([0, 1, 1, 0]))

    def test_prior_is_absorbed(self):
        g = CausalGraph.build(["u"], [])
        f = FunctionalModel(g, {"u": (0, 1)}, {"u": (0, 1, 2)}, {"u": np.array([0.2, 0.3, 0.5])},
                            {"u": {(0,): 0, (1,): 1, (2,): 1}})
        els = embed_functional_model(f).povms["u"].elements
        assert np.allclose(els[:, 0, 0], [0.2, 0.8])

    def test_incomplete_table(self):
        f = self.xor_vertex()
        f.functions["c"].pop((1, 1, 0))
        with pytest.raises(ModelError, match="no row"):
            embed_functional_model(f)

    def test_bad_prior(self):
        g = CausalGraph.build(["u"], [])
        f = FunctionalModel(g, {"u": (0,)}, {"u": (0,)}, {"u": np.array([0.9])}, {"u": {(0,): 0}})
        assert not f.validate().ok

    def test_random_embeddings_validate(self, rng):
        for acyclic in (True, False):
            for _ in range(15):
                f = random_functional(rng, int(rng.integers(1, 5)), 5, acyclic)
                assert validate_model(embed_functional_model(f)).ok


def test_povm_elements_sum_to_identity_after_embedding(rng):
    f = random_functional(rng, 3, 4, acyclic=False)
    m = embed_functional_model(f)
    for v, p in m.povms.items():
        assert np.allclose(p.elements.sum(axis=0), np.eye(p.dim))
