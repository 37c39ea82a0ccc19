import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcycle.errors import DimensionError
from qcycle.tensor import (
    ComplexTensor,
    KrausChannel,
    Povm,
    apply_channel,
    choi_to_kraus,
    decohere,
    kraus_to_choi,
    max_entangled,
    partial_trace,
    tensor_product,
    validate_cptp,
    validate_povm,
)

from oracles import partial_trace_loop
from randmodels import random_channel, random_state

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rand_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


class TestComplexTensor:
    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionError):
            ComplexTensor((2, 2), np.zeros(3))

    def test_rejects_empty_and_zero_dims(self):
        with pytest.raises(DimensionError):
            ComplexTensor((), np.zeros(1))
        with pytest.raises(DimensionError):
            ComplexTensor((2, 0), np.zeros(0))

    def test_row_major(self):
        t = ComplexTensor((2, 3), np.arange(6))
        assert t.to_array()[1, 0] == 3
        assert t.matricize([1]).shape == (3, 2)
        assert t.matricize([1])[0, 1] == 3

    def test_immutable(self):
        t = ComplexTensor((2,), [1, 2])
        with pytest.raises(ValueError):
            t.data[0] = 5


def test_identity_product():
    i2 = ComplexTensor.from_array(np.eye(2))
    out = tensor_product(i2, i2)
    assert out.dims == (2, 2, 2, 2)
    assert np.array_equal(out.matricize([0, 2]), np.eye(4))


def test_projector_product_is_diag_0100():
    p0 = ComplexTensor.from_array(np.diag([1, 0]))
    p1 = ComplexTensor.from_array(np.diag([0, 1]))
    assert np.array_equal(tensor_product(p0, p1).matricize([0, 2]), np.diag([0, 1, 0, 0]))


def test_trace_of_product(rng):
    a, b = rand_matrix(rng, 2), rand_matrix(rng, 2)
    ab = tensor_product(ComplexTensor.from_array(a), ComplexTensor.from_array(b)).matricize([0, 2])
    assert np.trace(ab) == pytest.approx(np.trace(a) * np.trace(b), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_tensor_product_associative(seed):
    # small Gaussian integers keep every product exact
    rng = np.random.default_rng(seed)
    a, b, c = (
        ComplexTensor.from_array(rng.integers(-9, 10, (d, d)) + 1j * rng.integers(-9, 10, (d, d)))
        for d in (2, 3, 2)
    )
    left = tensor_product(tensor_product(a, b), c)
    right = tensor_product(a, tensor_product(b, c))
    assert left.dims == right.dims
    assert np.array_equal(left.data, right.data)


class TestPartialTrace:
    def test_bell_marginal(self):
        phi = max_entangled(2)
        out = partial_trace(np.outer(phi, phi.conj()), [2, 2], [1])
        assert np.allclose(out, np.eye(2) / 2, atol=1e-15)

    def test_trace_all(self, rng):
        m = rand_matrix(rng, 6)
        out = partial_trace(m, [2, 3], [0, 1])
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(np.trace(m))

    def test_against_index_loops(self, rng):
        m = rand_matrix(rng, 12)
        for keep in range(3):
            traced = [k for k in range(3) if k != keep]
            assert np.allclose(partial_trace(m, [2, 3, 2], traced), partial_trace_loop(m, [2, 3, 2], keep), atol=1e-12)

    def test_keeps_relative_order(self, rng):
        a, b, c = rand_matrix(rng, 2), rand_matrix(rng, 3), rand_matrix(rng, 2)
        out = partial_trace(np.kron(np.kron(a, b), c), [2, 3, 2], [1])
        assert np.allclose(out, np.trace(b) * np.kron(a, c), atol=1e-12)

    def test_dimension_mismatch_names_sizes(self):
        with pytest.raises(DimensionError, match="does not match"):
            partial_trace(np.eye(4), [2, 3], [0])
        with pytest.raises(DimensionError, match="out of range"):
            partial_trace(np.eye(4), [2, 2], [2])

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_product_property(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rand_matrix(rng, 3), rand_matrix(rng, 2)
        assert np.abs(partial_trace(np.kron(a, b), [3, 2], [1]) - np.trace(b) * a).max() <= 1e-12


class TestChannels:
    def test_identity(self, rng):
        rho = random_state(rng, 3)
        assert np.allclose(apply_channel(KrausChannel.identity(3), rho), rho)

    def test_fully_depolarizing(self, rng):
        d = 3
        ops = [np.outer(np.eye(d)[i], np.eye(d)[j]) / np.sqrt(d) for i in range(d) for j in range(d)]
        ch = KrausChannel.from_operators(ops)
        assert np.allclose(apply_channel(ch, random_state(rng, d)), np.eye(d) / d, atol=1e-12)

    def test_measure_prepare_kills_coherence(self):
        ch = KrausChannel.from_operators([np.diag([1, 0]), np.diag([0, 1])])
        assert np.array_equal(apply_channel(ch, np.array([[0, 1], [0, 0]])), np.zeros((2, 2)))

    def test_shape_check(self):
        with pytest.raises(DimensionError):
            apply_channel(KrausChannel.identity(2), np.eye(3))
        with pytest.raises(DimensionError):
            KrausChannel(2, 3, np.zeros((1, 2, 2)))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 4), st.integers(1, 4))
    def test_output_is_a_state(self, seed, din, dout):
        rng = np.random.default_rng(seed)
        out = apply_channel(random_channel(rng, din, dout), random_state(rng, din))
        assert np.linalg.eigvalsh((out + out.conj().T) / 2).min() >= -1e-9
        assert abs(np.trace(out) - 1) <= 1e-9

    def test_choi_round_trip(self, rng):
        ch = random_channel(rng, 2, 3, rank=2)
        back = choi_to_kraus(kraus_to_choi(ch), 2, 3)
        rho = random_state(rng, 2)
        assert np.allclose(apply_channel(ch, rho), apply_channel(back, rho), atol=1e-12)

    def test_choi_of_identity_is_unnormalized_bell(self):
        phi = max_entangled(2)
        assert np.allclose(kraus_to_choi(KrausChannel.identity(2)), 2 * np.outer(phi, phi))

    def test_choi_rejects_negative(self):
        with pytest.raises(ValueError, match="not CP"):
            choi_to_kraus(np.diag([1.0, -0.5, 0.2, 0.3]), 2, 2)


class TestValidation:
    def test_identity_passes(self):
        rep = validate_cptp(KrausChannel.identity(2))
        assert rep.ok and rep.deviation == 0

    def test_doubled_identity_fails(self):
        rep = validate_cptp(KrausChannel.from_operators([np.eye(2), np.eye(2)]))
        assert not rep.ok
        assert rep.deviation == pytest.approx(1.0)

    def test_amplitude_damping(self):
        g = 0.3
        k0 = np.diag([1, np.sqrt(1 - g)])
        k1 = np.array([[0, np.sqrt(g)], [0, 0]])
        assert validate_cptp(KrausChannel.from_operators([k0, k1])).ok

    @pytest.mark.parametrize("d", [1, 2, 5])
    def test_basis_povm(self, d):
        assert validate_povm(Povm.from_elements([np.diag(np.eye(d)[k]) for k in range(d)])).ok

    def test_incomplete_povm(self):
        rep = validate_povm(Povm.from_elements([np.eye(2) / 2, np.eye(2) / 3]))
        assert not rep.ok
        assert "identity" in rep.issues[0].message

    def test_bell_projector_and_complement(self):
        phi = max_entangled(2)
        p = np.outer(phi, phi)
        assert validate_povm(Povm.from_elements([p, np.eye(4) - p])).ok

    def test_non_hermitian_element(self):
        e = np.array([[0.5, 0.1], [0.0, 0.5]])
        rep = validate_povm(Povm.from_elements([e, np.eye(2) - e]))
        assert any("Hermitian" in i.message for i in rep.issues)


class TestDecohere:
    def test_plus_state(self):
        plus = np.full((2, 2), 0.5)
        assert np.allclose(decohere(plus, [2], [0]), np.eye(2) / 2)

    def test_diagonal_unchanged(self):
        m = np.diag([0.2, 0.3, 0.5])
        assert np.array_equal(decohere(m, [3], [0]), m)

    def test_partial_targets(self, rng):
        m = rand_matrix(rng, 4)
        out = decohere(m, [2, 2], [1])
        t = out.reshape(2, 2, 2, 2)
        assert np.all(t[:, 0, :, 1] == 0) and np.all(t[:, 1, :, 0] == 0)
        assert np.trace(out) == pytest.approx(np.trace(m))

    @settings(max_examples=30, deadline=None)
    @given(seeds)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        m = rand_matrix(rng, 6)
        once = decohere(m, [2, 3], [0, 1])
        assert np.array_equal(decohere(once, [2, 3], [0, 1]), once)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            decohere(np.eye(3), [2], [0])
