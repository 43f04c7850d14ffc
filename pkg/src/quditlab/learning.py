"""Single-query quantum learners over Z_q, each reporting a sampled run and,
where the register is small enough, the exact success probability read off
the final statevector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError
from .modmath import ErrorDistribution, mod_inverse, totient
from .oracles import BernoulliParity, IndependentAdditive, OracleSpec, example_state, inner_product_oracle, membership_apply
from .state import QuditState, digit_table, exact_distribution, hadamard_all, marginal, measure_all, qft

PROB_TOL = 1e-9


@dataclass(frozen=True)
class SecretSpec:
    n: int
    q: int
    s: tuple

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(int(v) for v in self.s))
        if self.n < 1 or self.q < 2 or len(self.s) != self.n:
            raise ValueError("need n >= 1, q >= 2 and len(s) == n")
        if any(not 0 <= v < self.q for v in self.s):
            raise ValueError(f"secret entries must lie in [0, {self.q})")

    @classmethod
    def random(cls, n: int, q: int, rng: np.random.Generator, nonzero: bool = False) -> "SecretSpec":
        while True:
            s = tuple(int(v) for v in rng.integers(0, q, size=n))
            if not nonzero or any(s):
                return cls(n, q, s)


@dataclass
class LearnResult:
    hypothesis: tuple | None
    success: bool
    exact_success_prob: float | None = None
    queries_used: int = 1
    outcome: tuple | None = None
    details: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.hypothesis is None


@dataclass
class DJResult:
    verdict: str
    p_zero: float
    outcome: tuple
    promise_ok: bool


def deutsch_jozsa(spec: OracleSpec, rng: np.random.Generator) -> DJResult:
    """One membership query; 'constant' iff the input register reads 0^n.

    ``promise_ok`` is False when the exact probability of 0^n is neither 0
    nor 1, i.e. f is neither constant nor balanced.
    """
    if spec.q != 2 or spec.out_digits != 1:
        raise DimensionError("Deutsch-Jozsa needs a Boolean function")
    n = spec.n
    state = QuditState.basis(2, [0] * n + [1])
    state = hadamard_all(state)
    state = membership_apply(state, spec)
    state = hadamard_all(state, range(n))
    p_in = marginal(exact_distribution(state), 2, n + 1, list(range(n)))
    p_zero = float(p_in[0])
    outcome, _ = measure_all(state, rng)
    verdict = "constant" if not any(outcome[:n]) else "balanced"
    promise_ok = p_zero < PROB_TOL or p_zero > 1 - PROB_TOL
    return DJResult(verdict, p_zero, outcome[:n], promise_ok)


def bv_distribution(secret: SecretSpec) -> np.ndarray:
    """Exact distribution of the input register after Bernstein-Vazirani."""
    if secret.q != 2:
        raise DimensionError("Bernstein-Vazirani is defined over bits; use extended_bv for q > 2")
    n = secret.n
    state = QuditState.basis(2, [0] * n + [1])
    state = hadamard_all(state)
    state = membership_apply(state, inner_product_oracle(secret.s, 2))
    state = hadamard_all(state, range(n))
    return marginal(exact_distribution(state), 2, n + 1, list(range(n)))


def bernstein_vazirani(secret: SecretSpec, rng: np.random.Generator) -> LearnResult:
    n = secret.n
    p = bv_distribution(secret)
    idx = int(rng.choice(p.size, p=p / p.sum()))
    outcome = tuple((idx >> j) & 1 for j in range(n))
    s_idx = sum(b << j for j, b in enumerate(secret.s))
    return LearnResult(outcome, outcome == secret.s, float(p[s_idx]), 1, outcome)


def _parity_readout(outcome: tuple, rule: str):
    body, last = outcome[:-1], outcome[-1]
    if rule == "last-register":
        return body if last == 1 else None
    return body if any(body) else None


def _parity_post_state(secret: SecretSpec, e: int) -> QuditState:
    spec = inner_product_oracle(secret.s, 2)
    n = secret.n
    amps = np.zeros(2 ** (n + 1), dtype=np.complex128)
    labels = (spec.table() + e) % 2
    amps[np.arange(2**n) + 2**n * labels] = 2 ** (-n / 2)
    return hadamard_all(QuditState(2, n + 1, amps))


def quantum_parity_learn(secret: SecretSpec, eta: float, rng: np.random.Generator, readout: str = "auto") -> LearnResult:
    """Hadamard-transform one (possibly parity-flipped) example and read out.

    ``readout`` is ``"last-register"`` (keep the input register when the last
    qubit is 1), ``"nonzero"`` (keep any nonzero input register) or
    ``"auto"``, which picks the first rule for eta = 0 and the second otherwise.
    The exact success probability averages the two error branches.
    """
    if secret.q != 2:
        raise DimensionError("parity learning is defined over bits")
    if readout == "auto":
        readout = "last-register" if eta == 0 else "nonzero"
    if readout not in ("last-register", "nonzero"):
        raise ValueError(f"unknown readout rule {readout!r}")
    n = secret.n
    spec = inner_product_oracle(secret.s, 2, BernoulliParity(eta))
    sample, errors = example_state(spec, rng, return_errors=True)
    final = hadamard_all(sample)
    outcome, _ = measure_all(final, rng)
    hyp = _parity_readout(outcome, readout)

    exact = 0.0
    for e, weight in ((0, 1 - eta), (1, eta)):
        if weight == 0:
            continue
        probs = exact_distribution(_parity_post_state(secret, e))
        digits = digit_table(2, n + 1)
        for idx in np.nonzero(probs > 0)[0]:
            if _parity_readout(tuple(int(v) for v in digits[idx]), readout) == secret.s:
                exact += weight * probs[idx]
    degenerate = readout == "nonzero" and not any(secret.s)
    return LearnResult(
        hyp,
        hyp == secret.s,
        float(exact),
        1,
        outcome,
        {"readout": readout, "error_bit": int(errors[0]), "degenerate_secret": degenerate},
    )


def _ebv_success_mass(probs: np.ndarray, secret: SecretSpec) -> float:
    """Probability of outcomes z with gcd(z_{n+1}, q) = 1 and -z/z_{n+1} = s."""
    q, n = secret.q, secret.n
    s = np.array(secret.s, dtype=np.int64)
    weights = q ** np.arange(n + 1, dtype=np.int64)
    total = 0.0
    for t in range(q):
        if math.gcd(t, q) != 1:
            continue
        z = np.append((-t * s) % q, t)
        total += probs[int(z @ weights)]
    return float(total)


def ebv_decode(outcome: Sequence[int], q: int):
    """Post-processing step: s~ = -z / z_{n+1} mod q, or None when gcd(z_{n+1}, q) != 1."""
    t = outcome[-1]
    if math.gcd(t, q) != 1:
        return None
    inv = mod_inverse(t, q)
    return tuple((-z * inv) % q for z in outcome[:-1])


def _run_ebv(sample: QuditState, secret: SecretSpec, rng: np.random.Generator):
    final = qft(sample)
    probs = exact_distribution(final)
    outcome, _ = measure_all(final, rng)
    return outcome, ebv_decode(outcome, secret.q), probs


def extended_bv(secret: SecretSpec, rng: np.random.Generator) -> LearnResult:
    spec = inner_product_oracle(secret.s, secret.q)
    outcome, hyp, probs = _run_ebv(example_state(spec), secret, rng)
    exact = _ebv_success_mass(probs, secret)
    q, n = secret.q, secret.n
    s = np.array(secret.s, dtype=np.int64)
    line_mass = sum(probs[int(np.append((-t * s) % q, t) @ (q ** np.arange(n + 1)))] for t in range(q))
    return LearnResult(hyp, hyp == secret.s, exact, 1, outcome, {"line_mass": float(line_mass), "phi_over_q": totient(q) / q})


def lwe_interference_success(errors: np.ndarray, q: int) -> float:
    """Closed form q^-(2n+1) * sum over coprime t of |sum_x omega^(t e_x)|^2."""
    errors = np.asarray(errors, dtype=np.int64)
    size = errors.size
    total = 0.0
    for t in range(q):
        if math.gcd(t, q) == 1:
            total += abs(np.sum(np.exp(2j * np.pi * t * errors / q))) ** 2
    return float(total / (size**2 * q))


def lwe_success_bound(q: int, eta: int) -> float:
    """phi(q) / (24 eta q)."""
    return totient(q) / (24 * eta * q)


def extended_bv_lwe(
    secret: SecretSpec,
    chi: ErrorDistribution,
    rng: np.random.Generator,
    errors: np.ndarray | None = None,
    cap: int | None = None,
) -> LearnResult:
    """Extended Bernstein-Vazirani on one sample with independent errors e_x ~ chi.

    ``errors`` fixes the realized error vector (signed, indexed like the
    oracle table) instead of drawing it. ``details`` carries the closed-form
    interference value and the phi(q)/(24 eta q) bound next to the
    statevector probability.
    """
    q, n = secret.q, secret.n
    kwargs = {} if cap is None else {"cap": cap}
    spec = inner_product_oracle(secret.s, q, IndependentAdditive(chi))
    if errors is None:
        sample, errors = example_state(spec, rng, return_errors=True, **kwargs)
    else:
        errors = np.asarray(errors, dtype=np.int64)
        if errors.shape != (q**n,):
            raise DimensionError(f"need {q**n} errors")
        noiseless = inner_product_oracle(secret.s, q)
        labels = (noiseless.table() + errors) % q
        amps = np.zeros(q ** (n + 1), dtype=np.complex128)
        amps[np.arange(q**n) + q**n * labels] = q ** (-n / 2)
        sample = QuditState(q, n + 1, amps)
    outcome, hyp, probs = _run_ebv(sample, secret, rng)
    exact = _ebv_success_mass(probs, secret)
    details = {
        "closed_form": lwe_interference_success(errors, q),
        "bound": lwe_success_bound(q, chi.eta) if chi.eta >= 1 else None,
        "max_abs_error": int(np.max(np.abs(errors))),
    }
    return LearnResult(hyp, hyp == secret.s, exact, 1, outcome, details)


def amplify_budget(delta: float, p: float) -> int:
    """Trials needed so that p**trials <= delta."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if p <= 0:
        return 1
    if p >= 1:
        raise ValueError("a learner that always fails cannot be amplified")
    # guard against log ratios like 10.000000000000002
    return max(1, math.ceil(math.log(delta) / math.log(p) - 1e-9))


def amplify(
    learner: Callable[[np.random.Generator], LearnResult],
    delta: float,
    p: float,
    rng: np.random.Generator,
    verify: Callable[[tuple], bool] | None = None,
) -> LearnResult:
    """Repeat ``learner`` up to the budget; keep the first verified hypothesis.

    Without ``verify`` each trial's own ``success`` flag is trusted, which
    is the white-box mode where the harness knows the secret.
    """
    budget = amplify_budget(delta, p)
    seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(budget)
    used = 0
    for seq in seeds:
        res = learner(np.random.default_rng(seq))
        used += res.queries_used
        if res.hypothesis is None:
            continue
        ok = verify(res.hypothesis) if verify is not None else res.success
        if ok:
            return LearnResult(res.hypothesis, True, None, used, res.outcome, {"budget": budget, "failed": False})
    return LearnResult(None, False, None, used, None, {"budget": budget, "failed": True})
