import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditlab.errors import CapExceeded, DimensionError
from quditlab.modmath import ErrorDistribution
from quditlab.oracles import (
    AmplitudeDamping,
    BernoulliParity,
    BitFlip,
    Depolarizing,
    IndependentAdditive,
    OracleSpec,
    PhaseFlip,
    bitflip_code_cycle,
    channel_apply,
    example_state,
    inner_product_oracle,
    kraus_operators,
    membership_apply,
    membership_permutation,
    repetition_success_prob,
    simulate_repetition,
)
from quditlab.state import DensityMatrix, QuditState, digits_to_index, index_to_digits


def test_membership_bit_example():
    # f(x) = x_0 on two input bits: |1,0>|0> -> |1,0>|1>
    spec = inner_product_oracle((1, 0), 2)
    out = membership_apply(QuditState.basis(2, [1, 0, 0]), spec)
    assert np.flatnonzero(out.amps).tolist() == [digits_to_index([1, 0, 1], 2)]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(1, 2), st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_membership_permutation_matches_definition(q, n, k, seed):
    rng = np.random.default_rng(seed)
    table = rng.integers(0, q**k, size=q**n)
    spec = OracleSpec.from_table(n, q, table, out_digits=k)
    m = n + k
    perm = membership_permutation(spec, m)
    assert sorted(perm.tolist()) == list(range(q**m))
    for i in range(q**m):
        d = index_to_digits(i, q, m)
        x, y = d[:n], d[n:]
        fx = index_to_digits(int(table[digits_to_index(x, q)]), q, k)
        new = list(x) + [(a + b) % q for a, b in zip(y, fx)]
        assert perm[i] == digits_to_index(new, q)
    inv = membership_permutation(spec, m, inverse=True)
    assert np.array_equal(inv[perm], np.arange(q**m))


def test_membership_custom_layout():
    spec = inner_product_oracle((1,), 3)
    # output on digit 0, input on digit 2, digit 1 idle
    psi = QuditState.basis(3, [1, 0, 2])
    out = membership_apply(psi, spec, x_pos=[2], y_pos=[0])
    assert np.flatnonzero(out.amps).tolist() == [digits_to_index([0, 0, 2], 3)]
    with pytest.raises(DimensionError):
        membership_apply(psi, spec, x_pos=[0], y_pos=[0])


def test_membership_rejects_noise_and_bad_values():
    with pytest.raises(ValueError):
        membership_apply(QuditState.zeros(2, 2), inner_product_oracle((1,), 2, BernoulliParity(0.1)))
    with pytest.raises(ValueError):
        OracleSpec(1, 2, lambda x: 5).table()


def test_example_state_q3():
    spec = inner_product_oracle((1, 2), 3)
    psi = example_state(spec)
    support = np.flatnonzero(np.abs(psi.amps) > 0)
    assert len(support) == 9
    for idx in support:
        x0, x1, y = index_to_digits(int(idx), 3, 3)
        assert y == (x0 + 2 * x1) % 3
    assert psi.norm() == pytest.approx(1)


def test_example_state_parity_noise_is_global():
    rng = np.random.default_rng(0)
    spec = inner_product_oracle((1, 1), 2, BernoulliParity(0.3))
    seen = set()
    for _ in range(200):
        _, errs = example_state(spec, rng, return_errors=True)
        assert len(set(errs.tolist())) == 1
        seen.add(int(errs[0]))
    assert seen == {0, 1}


def test_example_state_independent_noise():
    rng = np.random.default_rng(1)
    chi = ErrorDistribution("bounded_uniform", 1, 7)
    spec = inner_product_oracle((3, 1), 7, IndependentAdditive(chi))
    psi, errs = example_state(spec, rng, return_errors=True)
    assert errs.shape == (49,)
    assert np.all(np.abs(errs) <= 1)
    table = spec.table()
    for x in range(49):
        assert abs(psi.amps[x + 49 * ((table[x] + errs[x]) % 7)]) == pytest.approx(1 / 7)
    with pytest.raises(CapExceeded):
        example_state(spec, rng, cap=10)


def test_bernoulli_validation():
    with pytest.raises(ValueError):
        BernoulliParity(0.5)


CHANNELS = [BitFlip, PhaseFlip, AmplitudeDamping, Depolarizing]


@pytest.mark.parametrize("cls", CHANNELS)
@pytest.mark.parametrize("p", [0.0, 0.2, 0.7, 1.0])
def test_kraus_completeness(cls, p):
    ks = kraus_operators(cls(p))
    assert np.allclose(sum(K.conj().T @ K for K in ks), np.eye(2))


@pytest.mark.parametrize("cls", CHANNELS)
def test_channels_preserve_validity(cls):
    rng = np.random.default_rng(7)
    for _ in range(200):
        rho = DensityMatrix.random(2, 1, rng, rank=int(rng.integers(1, 3)))
        out = channel_apply(rho, cls(float(rng.random())))
        assert out.is_valid()


def test_channel_actions():
    one = DensityMatrix.from_state(QuditState.basis(2, [1]))
    plus = DensityMatrix.from_state(QuditState(2, 1, np.array([1, 1]) / np.sqrt(2)))
    assert np.allclose(channel_apply(one, BitFlip(1.0)).rho, np.diag([1, 0]))
    assert np.allclose(channel_apply(one, AmplitudeDamping(0.25)).rho, np.diag([0.25, 0.75]))
    assert np.allclose(channel_apply(plus, PhaseFlip(0.5)).rho, np.eye(2) / 2)
    assert np.allclose(channel_apply(plus, Depolarizing(1.0)).rho, np.eye(2) / 2)
    # depolarizing is (1 - p) rho + p I/2
    p = 0.3
    assert np.allclose(channel_apply(plus, Depolarizing(p)).rho, (1 - p) * plus.rho + p * np.eye(2) / 2)


def test_channel_parameter_checks():
    with pytest.raises(ValueError):
        kraus_operators(BitFlip(1.5))
    with pytest.raises(DimensionError):
        channel_apply(DensityMatrix.random(2, 2, np.random.default_rng(0)), BitFlip(0.1))


@pytest.mark.parametrize("pos,syndrome", [(None, 0), (0, 1), (1, 2), (2, 3)])
def test_bitflip_code_corrects_single_flip(pos, syndrome):
    rng = np.random.default_rng(11)
    for _ in range(10):
        logical = QuditState.random(2, 1, rng)
        got, rec = bitflip_code_cycle(logical, pos, rng)
        assert got == syndrome
        assert abs(np.vdot(logical.amps, rec.amps)) == pytest.approx(1, abs=1e-12)


def test_bitflip_code_two_flips_give_logical_error():
    logical = QuditState(2, 1, np.array([0.6, 0.8]))
    _, rec = bitflip_code_cycle(logical, (0, 1), np.random.default_rng(0))
    assert np.allclose(rec.amps, [0.8, 0.6])


@pytest.mark.parametrize("p", [0.0, 0.05, 0.1, 0.3, 0.5, 1.0])
def test_repetition_formula_by_enumeration(p):
    exact = sum(p ** sum(bits) * (1 - p) ** (3 - sum(bits)) for bits in np.ndindex(2, 2, 2) if sum(bits) <= 1)
    assert repetition_success_prob(p) == pytest.approx(exact)


def test_repetition_monte_carlo():
    rng = np.random.default_rng(5)
    p, trials = 0.2, 50000
    expect = repetition_success_prob(p)
    sigma = np.sqrt(expect * (1 - expect) / trials)
    assert abs(simulate_repetition(p, trials, rng) - expect) < 4 * sigma
