"""Dense statevector simulation of registers of q-level systems.

Basis states are indexed little-endian: the register |x_0, x_1, ..., x_{m-1}>
sits at index ``sum_j x_j * q**j``, so digit 0 is the least significant.
Figures that draw qubit 0 as the most significant bit read in the
opposite order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError, NormalizationError, NotUnitaryError

STATE_TOL = 1e-9
MATRIX_TOL = 1e-10
MAX_AMPLITUDES = 2**22


def digits_to_index(digits: Sequence[int], q: int) -> int:
    idx = 0
    for j, d in enumerate(digits):
        if not 0 <= d < q:
            raise DimensionError(f"digit {d} out of range for q={q}")
        idx += int(d) * q**j
    return idx


def index_to_digits(index: int, q: int, m: int) -> tuple[int, ...]:
    out = []
    for _ in range(m):
        index, d = divmod(index, q)
        out.append(d)
    return tuple(out)


def digit_table(q: int, m: int) -> np.ndarray:
    """Array of shape (q**m, m); row i holds the digits of basis index i."""
    idx = np.arange(q**m, dtype=np.int64)
    return np.stack([(idx // q**j) % q for j in range(m)], axis=1) if m else idx[:, None]


@dataclass
class QuditState:
    q: int
    m: int
    amps: np.ndarray

    def __post_init__(self):
        if self.q < 2 or self.m < 1:
            raise DimensionError("need q >= 2 and m >= 1")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (self.q**self.m,):
            raise DimensionError(f"expected {self.q**self.m} amplitudes, got shape {self.amps.shape}")

    @classmethod
    def basis(cls, q: int, digits: Sequence[int]) -> "QuditState":
        m = len(digits)
        if q**m > MAX_AMPLITUDES:
            raise DimensionError(f"q^m = {q**m} exceeds the dense-simulation limit")
        amps = np.zeros(q**m, dtype=np.complex128)
        amps[digits_to_index(digits, q)] = 1.0
        return cls(q, m, amps)

    @classmethod
    def zeros(cls, q: int, m: int) -> "QuditState":
        return cls.basis(q, [0] * m)

    @classmethod
    def random(cls, q: int, m: int, rng: np.random.Generator) -> "QuditState":
        v = rng.normal(size=q**m) + 1j * rng.normal(size=q**m)
        return cls(q, m, v / np.linalg.norm(v))

    def copy(self) -> "QuditState":
        return QuditState(self.q, self.m, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor(self) -> np.ndarray:
        """View with one axis per digit; axis ``m - 1 - j`` is digit ``j``."""
        return self.amps.reshape((self.q,) * self.m)

    def __repr__(self):
        return f"QuditState(q={self.q}, m={self.m}, norm={self.norm():.6f})"


@dataclass
class DensityMatrix:
    q: int
    m: int
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=np.complex128)
        d = self.q**self.m
        if self.rho.shape != (d, d):
            raise DimensionError(f"expected a {d}x{d} matrix, got {self.rho.shape}")

    @classmethod
    def from_state(cls, state: QuditState) -> "DensityMatrix":
        return cls(state.q, state.m, np.outer(state.amps, state.amps.conj()))

    @classmethod
    def random(cls, q: int, m: int, rng: np.random.Generator, rank: int | None = None) -> "DensityMatrix":
        """G G^dagger / tr with a complex Gaussian G of the given rank (full by default)."""
        d = q**m
        k = d if rank is None else rank
        G = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
        rho = G @ G.conj().T
        return cls(q, m, rho / np.trace(rho).real)

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def is_valid(self, tol: float = STATE_TOL) -> bool:
        r = self.rho
        if abs(np.trace(r) - 1) > tol:
            return False
        if np.max(np.abs(r - r.conj().T)) > tol:
            return False
        return bool(np.linalg.eigvalsh((r + r.conj().T) / 2).min() >= -tol)


@dataclass
class UnitaryOp:
    """Matrix acting on the listed target digits.

    The matrix index is little-endian over ``targets``: ``targets[0]`` is the
    least significant digit of a row/column label.
    """

    targets: tuple[int, ...]
    matrix: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        self.targets = tuple(int(t) for t in self.targets)
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if len(set(self.targets)) != len(self.targets):
            raise DimensionError(f"repeated target digits {self.targets}")

    def is_unitary(self, tol: float = MATRIX_TOL) -> bool:
        U = self.matrix
        return bool(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) <= tol)

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.targets, self.matrix.conj().T, self.label + "^dag")


def apply_unitary(state: QuditState, op: UnitaryOp, check: bool = False) -> QuditState:
    """Return ``op`` applied to ``state``; the input is left untouched."""
    q, m, k = state.q, state.m, len(op.targets)
    if any(not 0 <= t < m for t in op.targets):
        raise DimensionError(f"targets {op.targets} out of range for m={m}")
    if op.matrix.shape != (q**k, q**k):
        raise DimensionError(f"operator shape {op.matrix.shape} does not act on {k} digits of dimension {q}")
    if check and not op.is_unitary():
        raise NotUnitaryError(f"operator {op.label or op.targets} is not unitary")
    U = op.matrix.reshape((q,) * (2 * k))
    # row/column axis a of U carries target digit k-1-a
    col_axes = [2 * k - 1 - i for i in range(k)]
    state_axes = [m - 1 - t for t in op.targets]
    out = np.tensordot(U, state.tensor(), axes=(col_axes, state_axes))
    out = np.moveaxis(out, list(range(k)), [m - 1 - op.targets[k - 1 - a] for a in range(k)])
    return QuditState(q, m, out.reshape(-1))


def apply_all(state: QuditState, ops: Sequence[UnitaryOp]) -> QuditState:
    for op in ops:
        state = apply_unitary(state, op)
    return state


def full_matrix(op: UnitaryOp, q: int, m: int) -> np.ndarray:
    """Dense q^m x q^m matrix of ``op`` on the whole register."""
    cols = [apply_unitary(QuditState.basis(q, index_to_digits(i, q, m)), op).amps for i in range(q**m)]
    return np.stack(cols, axis=1)


# --- gates -----------------------------------------------------------------

X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
I2 = np.eye(2, dtype=np.complex128)


def cnot_matrix() -> np.ndarray:
    # targets = (control, target): index = control + 2 * target
    U = np.zeros((4, 4), dtype=np.complex128)
    for c in range(2):
        for t in range(2):
            U[c + 2 * (t ^ c), c + 2 * t] = 1
    return U


def shift_matrix(q: int, k: int = 1) -> np.ndarray:
    """U(k): |x> -> |x + k mod q>."""
    U = np.zeros((q, q), dtype=np.complex128)
    for x in range(q):
        U[(x + k) % q, x] = 1
    return U


def clock_matrix(q: int) -> np.ndarray:
    return np.diag(np.exp(2j * np.pi * np.arange(q) / q))


def rotation(axis: str, theta: float) -> np.ndarray:
    P = {"x": X, "y": Y, "z": Z}[axis]
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * P


def gate(name: str, *targets: int) -> UnitaryOp:
    mats = {"x": X, "y": Y, "z": Z, "h": H, "cnot": cnot_matrix()}
    return UnitaryOp(targets, mats[name.lower()], name.upper())


# --- QFT over Z_q ------------------------------------------------------------


@lru_cache(maxsize=64)
def _qft_cached(q: int, inverse: bool) -> np.ndarray:
    xy = np.outer(np.arange(q), np.arange(q)) % q
    sign = -1 if inverse else 1
    F = np.exp(sign * 2j * np.pi * xy / q) / np.sqrt(q)
    F.setflags(write=False)
    return F


def qft_matrix(q: int, inverse: bool = False) -> np.ndarray:
    """F[y, x] = omega_q^(x*y) / sqrt(q), omega conjugated when ``inverse``."""
    if q < 2:
        raise DimensionError("q must be at least 2")
    return _qft_cached(q, inverse)


def qft(state: QuditState, targets: Sequence[int] | None = None, inverse: bool = False) -> QuditState:
    """Apply the Fourier transform over Z_q independently to each target digit."""
    targets = range(state.m) if targets is None else targets
    F = qft_matrix(state.q, inverse)
    for t in targets:
        state = apply_unitary(state, UnitaryOp((t,), F, "QFT"))
    return state


def hadamard_all(state: QuditState, targets: Sequence[int] | None = None) -> QuditState:
    if state.q != 2:
        raise DimensionError("Hadamard is a qubit gate; use qft for q > 2")
    return qft(state, targets)


def check_root_orthogonality(q: int) -> dict:
    """Check sum_y w^(xy) w^(-x'y) = q [x == x'] for all pairs in Z_q."""
    if q < 2:
        raise ValueError("q must be at least 2")
    w = np.exp(2j * np.pi * np.outer(np.arange(q), np.arange(q)) / q)  # w[x, y] = omega^(xy)
    sums = w @ w.conj().T
    dev = float(np.max(np.abs(sums - q * np.eye(q))))
    return {"q": q, "pairs": q * q, "max_deviation": dev, "passed": dev <= STATE_TOL}


def root_sum(q: int, x: int, x_prime: int) -> complex:
    y = np.arange(q)
    return complex(np.sum(np.exp(2j * np.pi * (x - x_prime) * y / q)))


def check_shift_diagonality(q: int) -> dict:
    """Conjugate the cyclic shift by the Fourier transform and compare with diag(omega^y)."""
    F = qft_matrix(q)
    D = F @ shift_matrix(q) @ F.conj().T
    expected = np.exp(2j * np.pi * np.arange(q) / q)
    off = D - np.diag(np.diag(D))
    off_max = float(np.max(np.abs(off)))
    diag_dev = float(np.max(np.abs(np.diag(D) - expected)))
    return {
        "q": q,
        "diagonal": np.diag(D),
        "max_offdiag": off_max,
        "max_diag_deviation": diag_dev,
        "passed": max(off_max, diag_dev) <= STATE_TOL,
    }


def unitarity_deviation(U: np.ndarray) -> float:
    return float(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))))


# --- measurement and distances ---------------------------------------------------


def exact_distribution(state: QuditState) -> np.ndarray:
    return np.abs(state.amps) ** 2


def marginal(probs: np.ndarray, q: int, m: int, keep: Sequence[int]) -> np.ndarray:
    """Marginal distribution over the ``keep`` digits, indexed little-endian in that order."""
    t = probs.reshape((q,) * m)
    drop = tuple(m - 1 - j for j in range(m) if j not in keep)
    t = t.sum(axis=drop) if drop else t
    # remaining axes are in decreasing digit order; reorder to match ``keep``
    remaining = sorted(keep, reverse=True)
    order = [remaining.index(j) for j in reversed(list(keep))]
    return np.transpose(t, order).reshape(-1)


def _check_norm(state: QuditState):
    n = state.norm()
    if abs(n - 1) > STATE_TOL:
        raise NormalizationError(f"state norm {n} differs from 1")


def measure_all(state: QuditState, rng: np.random.Generator) -> tuple[tuple[int, ...], QuditState]:
    _check_norm(state)
    p = exact_distribution(state)
    idx = int(rng.choice(p.size, p=p / p.sum()))
    digits = index_to_digits(idx, state.q, state.m)
    return digits, QuditState.basis(state.q, digits)


def inner(a: QuditState, b: QuditState) -> complex:
    if (a.q, a.m) != (b.q, b.m):
        raise DimensionError("states live on different registers")
    return complex(np.vdot(a.amps, b.amps))


def trace_distance(a: QuditState, b: QuditState) -> float:
    """Trace distance of two pure states, sqrt(1 - |<a|b>|^2)."""
    overlap = abs(inner(a, b)) ** 2
    return float(np.sqrt(max(0.0, 1.0 - overlap)))
