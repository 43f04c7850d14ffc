"""Membership and example oracles, single-qubit noise channels and the
three-qubit bit-flip code.

An :class:`OracleSpec` describes ``f : Z_q^n -> Z_q^k`` (``k`` output digits,
default 1). Outputs are combined digit-wise mod q, which for q = 2 is the
usual XOR. Functions are given as closures over digit tuples and evaluated
once into a dense table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import CapExceeded, DimensionError
from .modmath import ErrorDistribution, sample_error
from .state import (
    DensityMatrix,
    QuditState,
    X,
    Y,
    Z,
    apply_unitary,
    digit_table,
    gate,
    index_to_digits,
)

__all__ = [
    "BernoulliParity",
    "IndependentAdditive",
    "ErrorDistribution",
    "OracleSpec",
    "inner_product_oracle",
    "membership_apply",
    "membership_permutation",
    "example_state",
    "BitFlip",
    "PhaseFlip",
    "AmplitudeDamping",
    "Depolarizing",
    "kraus_operators",
    "channel_apply",
    "bitflip_code_cycle",
    "repetition_success_prob",
    "simulate_repetition",
]

DEFAULT_EXAMPLE_CAP = 2**16


@dataclass(frozen=True)
class BernoulliParity:
    """One global error e ~ Bern(eta) added to every branch of the output."""

    eta: float

    def __post_init__(self):
        if not 0 <= self.eta < 0.5:
            raise ValueError("eta must lie in [0, 1/2)")


@dataclass(frozen=True)
class IndependentAdditive:
    """A fresh error e_x ~ chi for every input x."""

    chi: ErrorDistribution


Noise = Union[None, BernoulliParity, IndependentAdditive]


@dataclass(frozen=True)
class OracleSpec:
    n: int
    q: int
    f: Callable[[tuple], int] = field(compare=False)
    noise: Noise = None
    out_digits: int = 1

    def __post_init__(self):
        if self.n < 1 or self.q < 2 or self.out_digits < 1:
            raise ValueError("need n >= 1, q >= 2, out_digits >= 1")

    @property
    def out_size(self) -> int:
        return self.q**self.out_digits

    def table(self) -> np.ndarray:
        """f evaluated at every input index (little-endian), as integers in [0, q^k)."""
        cached = self.__dict__.get("_table")
        if cached is None:
            digits = digit_table(self.q, self.n)
            cached = np.array([int(self.f(tuple(int(v) for v in row))) for row in digits], dtype=np.int64)
            if cached.min() < 0 or cached.max() >= self.out_size:
                raise ValueError("f produced values outside Z_q^k")
            cached.setflags(write=False)
            object.__setattr__(self, "_table", cached)
        return cached

    @classmethod
    def from_table(cls, n: int, q: int, table, noise: Noise = None, out_digits: int = 1) -> "OracleSpec":
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (q**n,):
            raise DimensionError(f"table must have q^n = {q**n} entries")
        spec = cls(n, q, lambda x, _t=table, _q=q: int(_t[sum(d * _q**j for j, d in enumerate(x))]), noise, out_digits)
        frozen = table.copy()
        frozen.setflags(write=False)
        object.__setattr__(spec, "_table", frozen)
        return spec


def inner_product_oracle(s: Sequence[int], q: int, noise: Noise = None) -> OracleSpec:
    """f_s(x) = <s, x> mod q."""
    s = tuple(int(v) % q for v in s)
    return OracleSpec(len(s), q, lambda x: sum(a * b for a, b in zip(s, x)) % q, noise)


def _digit_add(a: np.ndarray, b: np.ndarray, q: int, k: int, sign: int = 1) -> np.ndarray:
    out = np.zeros_like(a)
    for j in range(k):
        da = (a // q**j) % q
        db = (b // q**j) % q
        out += ((da + sign * db) % q) * q**j
    return out


def membership_permutation(
    spec: OracleSpec, m: int, x_pos: Sequence[int] | None = None, y_pos: Sequence[int] | None = None, inverse: bool = False
) -> np.ndarray:
    """Index map ``perm`` with new_amps[perm[i]] = amps[i] for |x>|y> -> |x>|y + f(x)>."""
    q, n, k = spec.q, spec.n, spec.out_digits
    x_pos = list(range(n)) if x_pos is None else list(x_pos)
    y_pos = list(range(n, n + k)) if y_pos is None else list(y_pos)
    if len(x_pos) != n or len(y_pos) != k or len(set(x_pos + y_pos)) != n + k or max(x_pos + y_pos) >= m:
        raise DimensionError(f"register layout x={x_pos} y={y_pos} does not fit the oracle on m={m} digits")
    d = digit_table(q, m)
    weights = q ** np.arange(m, dtype=np.int64)
    x_idx = d[:, x_pos] @ (q ** np.arange(n, dtype=np.int64))
    y_val = d[:, y_pos] @ (q ** np.arange(k, dtype=np.int64))
    new_y = _digit_add(y_val, spec.table()[x_idx], q, k, -1 if inverse else 1)
    new_d = d.copy()
    for j, pos in enumerate(y_pos):
        new_d[:, pos] = (new_y // q**j) % q
    return new_d @ weights


def membership_apply(
    state: QuditState,
    spec: OracleSpec,
    x_pos: Sequence[int] | None = None,
    y_pos: Sequence[int] | None = None,
    inverse: bool = False,
    perm: np.ndarray | None = None,
) -> QuditState:
    """Apply the reversible oracle |x>|y> -> |x>|y + f(x) mod q> (digit-wise).

    By default the input occupies digits ``0..n-1`` and the output the next
    ``out_digits`` digits. ``perm`` may carry a precomputed
    :func:`membership_permutation` for repeated queries.
    """
    if spec.noise is not None:
        raise ValueError("membership oracles are noiseless")
    if state.q != spec.q:
        raise DimensionError(f"state has q={state.q}, oracle has q={spec.q}")
    if perm is None:
        perm = membership_permutation(spec, state.m, x_pos, y_pos, inverse)
    out = np.empty_like(state.amps)
    out[perm] = state.amps
    return QuditState(state.q, state.m, out)


def example_state(spec: OracleSpec, rng: np.random.Generator | None = None, cap: int = DEFAULT_EXAMPLE_CAP, return_errors: bool = False):
    """One uniform example q^(-n/2) sum_x |x>|f(x) + e_x>.

    With no noise ``e_x = 0``; with :class:`BernoulliParity` a single error is
    drawn for the whole sample; with :class:`IndependentAdditive` every x gets
    its own draw. ``return_errors`` also returns the realized error vector
    (signed integers, indexed like :meth:`OracleSpec.table`).
    """
    q, n, k = spec.q, spec.n, spec.out_digits
    size = q**n
    noise = spec.noise
    if noise is None:
        errors = np.zeros(size, dtype=np.int64)
    elif isinstance(noise, BernoulliParity):
        e = int(rng.random() < noise.eta)
        errors = np.full(size, e, dtype=np.int64)
    elif isinstance(noise, IndependentAdditive):
        if size > cap:
            raise CapExceeded(f"independent noise needs q^n = {size} draws, cap is {cap}")
        if noise.chi.q != q:
            raise ValueError("error distribution modulus differs from the oracle's")
        errors = np.asarray(sample_error(noise.chi, rng, size=size), dtype=np.int64)
    else:
        raise TypeError(f"unsupported noise model {noise!r}")
    if k != 1 and noise is not None:
        raise ValueError("noisy example oracles are defined for a single output digit")
    labels = _digit_add(spec.table(), np.mod(errors, q), q, k)
    amps = np.zeros(q ** (n + k), dtype=np.complex128)
    amps[np.arange(size) + size * labels] = 1 / np.sqrt(size)
    state = QuditState(q, n + k, amps)
    return (state, errors) if return_errors else state


# --- single-qubit channels ----------------------------------------------------------


@dataclass(frozen=True)
class BitFlip:
    eta: float


@dataclass(frozen=True)
class PhaseFlip:
    eta: float


@dataclass(frozen=True)
class AmplitudeDamping:
    gamma: float


@dataclass(frozen=True)
class Depolarizing:
    eta: float


def kraus_operators(kind) -> list[np.ndarray]:
    p = kind.gamma if isinstance(kind, AmplitudeDamping) else kind.eta
    if not 0 <= p <= 1:
        raise ValueError("channel parameter must lie in [0, 1]")
    I = np.eye(2, dtype=np.complex128)
    if isinstance(kind, BitFlip):
        return [np.sqrt(1 - p) * I, np.sqrt(p) * X]
    if isinstance(kind, PhaseFlip):
        return [np.sqrt(1 - p) * I, np.sqrt(p) * Z]
    if isinstance(kind, AmplitudeDamping):
        return [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=np.complex128), np.array([[0, np.sqrt(p)], [0, 0]], dtype=np.complex128)]
    if isinstance(kind, Depolarizing):
        # (1 - p) rho + p I/2 written with Pauli Kraus operators
        return [np.sqrt(1 - 3 * p / 4) * I] + [np.sqrt(p / 4) * P for P in (X, Y, Z)]
    raise TypeError(f"unknown channel {kind!r}")


def channel_apply(rho: DensityMatrix, kind) -> DensityMatrix:
    if (rho.q, rho.m) != (2, 1):
        raise DimensionError("channels act on a single qubit")
    out = sum(E @ rho.rho @ E.conj().T for E in kraus_operators(kind))
    return DensityMatrix(2, 1, out)


# --- three-qubit bit-flip code -------------------------------------------------------


def _syndrome_projectors() -> list[np.ndarray]:
    """P_0 (no flip) and P_{j+1} (flip on digit j), as diagonal masks over 8 indices."""
    masks = []
    for flipped in (None, 0, 1, 2):
        mask = np.zeros(8)
        for logical in (0, 1):
            bits = [logical] * 3
            if flipped is not None:
                bits[flipped] ^= 1
            mask[bits[0] + 2 * bits[1] + 4 * bits[2]] = 1
        masks.append(mask)
    return masks


def bitflip_code_cycle(logical, error_positions=None, rng: np.random.Generator | None = None):
    """Encode c0|0> + c1|1> into c0|000> + c1|111>, flip the given digits,
    measure the syndrome projectors P_0..P_3 in order, correct and decode.

    Returns ``(syndrome, recovered)`` where ``recovered`` is a single-qubit
    :class:`QuditState`. With two or more flips the correction picks the wrong
    qubit and the logical state comes back flipped.
    """
    amps = logical.amps if isinstance(logical, QuditState) else np.asarray(logical, dtype=np.complex128)
    if amps.shape != (2,):
        raise DimensionError("logical input must be a single qubit")
    if error_positions is None:
        error_positions = ()
    elif isinstance(error_positions, int):
        error_positions = (error_positions,)
    rng = rng or np.random.default_rng()

    psi = QuditState(2, 3, np.kron(np.array([1, 0]), np.kron(np.array([1, 0]), amps)))
    psi = apply_unitary(psi, gate("cnot", 0, 1))
    psi = apply_unitary(psi, gate("cnot", 0, 2))
    for pos in error_positions:
        psi = apply_unitary(psi, gate("x", pos))

    syndrome = None
    for j, mask in enumerate(_syndrome_projectors()):
        p_one = float(np.sum(mask * np.abs(psi.amps) ** 2))
        if rng.random() < p_one:
            psi = QuditState(2, 3, psi.amps * mask / np.sqrt(p_one))
            syndrome = j
            break
        psi = QuditState(2, 3, psi.amps * (1 - mask) / np.sqrt(1 - p_one))
    if syndrome is None:  # unreachable for states inside the code space plus bit flips
        raise RuntimeError("no syndrome projector fired")
    if syndrome > 0:
        psi = apply_unitary(psi, gate("x", syndrome - 1))

    psi = apply_unitary(psi, gate("cnot", 0, 2))
    psi = apply_unitary(psi, gate("cnot", 0, 1))
    # ancillas are back in |00>, so the data qubit occupies indices 0 and 1
    recovered = QuditState(2, 1, psi.amps[:2])
    return syndrome, recovered


def repetition_success_prob(p: float) -> float:
    """Majority vote over three copies, each flipped independently with prob p."""
    return 1 - 3 * p**2 + 2 * p**3


def simulate_repetition(p: float, trials: int, rng: np.random.Generator) -> float:
    flips = rng.random((trials, 3)) < p
    return float(np.mean(flips.sum(axis=1) <= 1))
