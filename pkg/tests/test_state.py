import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditlab.errors import DimensionError, NormalizationError, NotUnitaryError
from quditlab.state import (
    DensityMatrix,
    H,
    QuditState,
    UnitaryOp,
    X,
    apply_unitary,
    check_root_orthogonality,
    check_shift_diagonality,
    clock_matrix,
    digit_table,
    digits_to_index,
    exact_distribution,
    full_matrix,
    gate,
    hadamard_all,
    index_to_digits,
    inner,
    marginal,
    measure_all,
    qft,
    qft_matrix,
    root_sum,
    rotation,
    shift_matrix,
    trace_distance,
    unitarity_deviation,
)
from reference import embed, qft_formula


@given(st.integers(2, 7), st.integers(1, 5), st.data())
def test_digit_index_roundtrip(q, m, data):
    idx = data.draw(st.integers(0, q**m - 1))
    digits = index_to_digits(idx, q, m)
    assert digits_to_index(digits, q) == idx
    assert tuple(digit_table(q, m)[idx]) == digits


def test_basis_is_little_endian():
    s = QuditState.basis(3, [2, 1])
    assert np.flatnonzero(s.amps).tolist() == [2 + 3 * 1]


def test_state_validation():
    with pytest.raises(DimensionError):
        QuditState(2, 2, np.ones(3))
    with pytest.raises(DimensionError):
        QuditState.basis(3, [3])


def _random_unitary(d, rng):
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_apply_unitary_matches_explicit_embedding(q, m, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, min(m, 3) + 1))
    targets = [int(t) for t in rng.permutation(m)[:k]]
    U = _random_unitary(q**k, rng)
    psi = QuditState.random(q, m, rng)
    got = apply_unitary(psi, UnitaryOp(targets, U)).amps
    want = embed(U, targets, q, m) @ psi.amps
    assert np.allclose(got, want, atol=1e-12)


def test_full_matrix_matches_embedding():
    rng = np.random.default_rng(1)
    U = _random_unitary(9, rng)
    assert np.allclose(full_matrix(UnitaryOp((2, 0), U), 3, 3), embed(U, (2, 0), 3, 3))


def test_cnot_control_target_convention():
    # control on digit 0, target digit 1: |1,0> -> |1,1>
    out = apply_unitary(QuditState.basis(2, [1, 0]), gate("cnot", 0, 1))
    assert np.flatnonzero(out.amps).tolist() == [digits_to_index([1, 1], 2)]
    out = apply_unitary(QuditState.basis(2, [0, 1]), gate("cnot", 0, 1))
    assert np.flatnonzero(out.amps).tolist() == [digits_to_index([0, 1], 2)]


def test_bell_state():
    psi = apply_unitary(QuditState.zeros(2, 2), gate("h", 0))
    psi = apply_unitary(psi, gate("cnot", 0, 1))
    assert np.allclose(psi.amps, [2**-0.5, 0, 0, 2**-0.5])


def test_apply_unitary_checks():
    psi = QuditState.zeros(2, 2)
    with pytest.raises(DimensionError):
        apply_unitary(psi, UnitaryOp((2,), X))
    with pytest.raises(DimensionError):
        apply_unitary(psi, UnitaryOp((0,), np.eye(3)))
    with pytest.raises(NotUnitaryError):
        apply_unitary(psi, UnitaryOp((0,), np.array([[1, 1], [0, 1]])), check=True)
    with pytest.raises(DimensionError):
        UnitaryOp((0, 0), np.eye(4))


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_rotations_unitary(axis):
    for theta in np.linspace(0, 2 * np.pi, 7):
        assert unitarity_deviation(rotation(axis, theta)) < 1e-12
    assert np.allclose(rotation(axis, np.pi), -1j * {"x": X, "y": gate("y").matrix, "z": gate("z").matrix}[axis])


@pytest.mark.parametrize("q", range(2, 17))
def test_qft_matrix_formula_and_unitarity(q):
    F = qft_matrix(q)
    assert np.allclose(F, qft_formula(q), atol=1e-12)
    assert unitarity_deviation(F) < 1e-10
    assert np.allclose(qft_matrix(q, inverse=True), F.conj().T)


def test_qft_q2_is_hadamard():
    assert np.allclose(qft_matrix(2), H)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_qft_inverse_roundtrip(q, m, seed):
    psi = QuditState.random(q, m, np.random.default_rng(seed))
    back = qft(qft(psi), inverse=True)
    assert np.allclose(back.amps, psi.amps)


@pytest.mark.parametrize("q", range(2, 17))
def test_root_orthogonality_and_shift_diagonality(q):
    assert check_root_orthogonality(q)["passed"]
    res = check_shift_diagonality(q)
    assert res["passed"]
    assert np.allclose(res["diagonal"], np.exp(2j * np.pi * np.arange(q) / q))


def test_root_sum_values():
    assert abs(root_sum(5, 2, 2) - 5) < 1e-12
    assert abs(root_sum(5, 2, 4)) < 1e-12


@pytest.mark.parametrize("q", [2, 3, 5, 8])
def test_shift_clock_commutation(q):
    Xq, Zq = shift_matrix(q), clock_matrix(q)
    w = np.exp(2j * np.pi / q)
    assert np.allclose(Zq @ Xq, w * Xq @ Zq)
    assert np.allclose(np.linalg.matrix_power(Xq, q), np.eye(q))


def test_hadamard_all_rejects_qutrits():
    with pytest.raises(DimensionError):
        hadamard_all(QuditState.zeros(3, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_marginal_matches_direct_sum(q, m, seed):
    rng = np.random.default_rng(seed)
    psi = QuditState.random(q, m, rng)
    keep = [int(v) for v in rng.permutation(m)[: int(rng.integers(1, m + 1))]]
    p = exact_distribution(psi)
    want = np.zeros(q ** len(keep))
    for idx, prob in enumerate(p):
        d = index_to_digits(idx, q, m)
        want[digits_to_index([d[j] for j in keep], q)] += prob
    assert np.allclose(marginal(p, q, m, keep), want)


def test_measure_collapses_and_checks_norm():
    rng = np.random.default_rng(0)
    psi = hadamard_all(QuditState.zeros(2, 3))
    digits, post = measure_all(psi, rng)
    assert exact_distribution(post)[digits_to_index(digits, 2)] == pytest.approx(1)
    with pytest.raises(NormalizationError):
        measure_all(QuditState(2, 1, [1, 1]), rng)


def test_measure_statistics():
    rng = np.random.default_rng(3)
    psi = QuditState(3, 1, np.sqrt([0.2, 0.3, 0.5]))
    counts = np.zeros(3)
    for _ in range(4000):
        counts[measure_all(psi, rng)[0][0]] += 1
    assert np.allclose(counts / 4000, [0.2, 0.3, 0.5], atol=0.03)


def test_trace_distance_pure_states():
    a = QuditState.basis(2, [0])
    b = QuditState(2, 1, np.array([1, 1]) / np.sqrt(2))
    assert trace_distance(a, a) == pytest.approx(0)
    assert trace_distance(a, b) == pytest.approx(np.sqrt(0.5))
    # pure-state trace distance equals half the trace norm of the difference
    rho = np.outer(a.amps, a.amps.conj()) - np.outer(b.amps, b.amps.conj())
    assert trace_distance(a, b) == pytest.approx(0.5 * np.abs(np.linalg.eigvalsh(rho)).sum())
    assert inner(a, b) == pytest.approx(2**-0.5)


def test_density_matrix_helpers():
    rng = np.random.default_rng(0)
    rho = DensityMatrix.random(2, 2, rng)
    assert rho.is_valid()
    assert DensityMatrix.from_state(QuditState.random(3, 1, rng)).is_valid()
    assert not DensityMatrix(2, 1, np.diag([1.2, -0.2])).is_valid()
    with pytest.raises(DimensionError):
        DensityMatrix(2, 1, np.eye(3))
