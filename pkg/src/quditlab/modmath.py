"""Modular arithmetic, small number theory, Gaussian elimination over prime
fields and the integer samplers used by the schemes and oracles.

Vectors and matrices over Z_q are plain numpy int64 arrays whose entries
are kept reduced into ``[0, q)``; :func:`reduce_mod` does the reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import InconsistentSystem, NoInverse, Underdetermined

# Miller-Rabin with these bases is deterministic below 3,215,031,751 > 2**32.
_MR_BASES = (2, 3, 5, 7)
MAX_MODULUS = 2**32


def reduce_mod(x, q):
    return np.mod(np.asarray(x, dtype=np.int64), q)


def prime_factors(q: int) -> list[int]:
    """Distinct prime divisors of ``q`` in increasing order."""
    if q < 1:
        raise ValueError("q must be positive")
    out = []
    p = 2
    while p * p <= q:
        if q % p == 0:
            out.append(p)
            while q % p == 0:
                q //= p
        p += 1 if p == 2 else 2
    if q > 1:
        out.append(q)
    return out


def totient(q: int) -> int:
    result = q
    for p in prime_factors(q):
        result -= result // p
    return result


def euler_product(q: int) -> Fraction:
    """prod over primes p | q of (1 - 1/p), as an exact rational."""
    return reduce(lambda acc, p: acc * Fraction(p - 1, p), prime_factors(q), Fraction(1))


def totient_table(limit: int) -> np.ndarray:
    """phi(k) for k = 0..limit via a sieve; entry 0 is 0."""
    phi = np.arange(limit + 1, dtype=np.int64)
    for p in range(2, limit + 1):
        if phi[p] == p:  # untouched so far, hence prime
            phi[p::p] -= phi[p::p] // p
    return phi


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Return (g, x, y) with a*x + b*y = g = gcd(a, b)."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        k, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - k * x1
        y0, y1 = y1, y0 - k * y1
    return a, x0, y0


def mod_inverse(a: int, q: int) -> int:
    g, x, _ = egcd(a % q, q)
    if g != 1:
        raise NoInverse(a, q)
    return x % q


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    if n >= 3_215_031_751:
        raise ValueError("deterministic witness set only covers n < 3215031751")
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def sample_prime(n: int, rng: np.random.Generator) -> int:
    """Uniform prime from [2**n / 2, 2**n) by rejection sampling."""
    if n < 2:
        raise ValueError(f"prime range [2^{n}/2, 2^{n}) contains no primes")
    if n > 30:
        raise ValueError("n > 30 is outside the supported range")
    lo, hi = 1 << (n - 1), 1 << n
    while True:
        candidate = int(rng.integers(lo, hi))
        if is_prime(candidate):
            return candidate


def rank_mod_p(A, q: int) -> int:
    """Rank of ``A`` over the field Z_q (q prime)."""
    return _row_reduce(np.array(A, dtype=np.int64) % q, q)[1]


def _row_reduce(M: np.ndarray, q: int):
    M = M.copy()
    rows, cols = M.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(M[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            M[[r, piv]] = M[[piv, r]]
        M[r] = M[r] * mod_inverse(int(M[r, c]), q) % q
        others = np.nonzero(M[:, c])[0]
        for i in others:
            if i != r:
                M[i] = (M[i] - M[i, c] * M[r]) % q
        pivots.append(c)
        r += 1
    return M, r, pivots


def gaussian_eliminate(A, b, q: int) -> np.ndarray:
    """Solve ``A s = b (mod q)`` for prime ``q``.

    Overdetermined systems are accepted as long as they are consistent.
    Raises :class:`Underdetermined` when rank(A) < number of unknowns.
    """
    if not is_prime(q):
        raise ValueError("gaussian_eliminate requires a prime modulus")
    A = np.atleast_2d(np.array(A, dtype=np.int64)) % q
    b = np.array(b, dtype=np.int64).reshape(-1, 1) % q
    if A.shape[0] != b.shape[0]:
        raise ValueError("A and b disagree on the number of equations")
    n = A.shape[1]
    M, rank, pivots = _row_reduce(np.hstack([A, b]), q)
    if n in pivots:
        raise InconsistentSystem("system has no solution mod q")
    if rank < n:
        raise Underdetermined(rank, n)
    return M[:n, n].copy()


def independence_probability(n: int) -> Fraction:
    """Chance that n uniform vectors in F_2^n are linearly independent."""
    return reduce(lambda acc, j: acc * (1 - Fraction(1, 2 ** (n - j))), range(n), Fraction(1))


def centered(x, q):
    """Representative of x mod q in (-q/2, q/2]."""
    r = np.mod(x, q)
    return np.where(r > q // 2, r - q, r)


def circular_distance(x, y, q):
    d = np.mod(np.asarray(x) - np.asarray(y), q)
    return np.minimum(d, q - d)


@dataclass(frozen=True)
class ErrorDistribution:
    """Symmetric error distribution on Z_q with support inside [-eta, eta].

    ``kind`` is ``"bounded_uniform"`` (uniform on the integers in
    ``[-eta, eta]``) or ``"rounded_gaussian"`` (a continuous normal of width
    ``sigma``, rounded to the nearest integer and rejected until ``|e| <= eta``).
    ``sigma`` defaults to ``eta / 2``.
    """

    kind: str
    eta: int
    q: int
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("bounded_uniform", "rounded_gaussian"):
            raise ValueError(f"unknown error distribution kind {self.kind!r}")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if self.q < 2:
            raise ValueError("q must be at least 2")

    @property
    def width(self) -> float:
        return self.sigma if self.sigma is not None else self.eta / 2

    def support(self) -> np.ndarray:
        return np.arange(-self.eta, self.eta + 1)

    def weights(self) -> np.ndarray:
        """Exact probabilities of ``support()`` (signed values, not reduced)."""
        e = self.support()
        if self.eta == 0:
            return np.ones(1)
        if self.kind == "bounded_uniform":
            return np.full(e.size, 1.0 / e.size)
        s = self.width
        cdf = np.array([0.5 * (1 + math.erf(t / (s * math.sqrt(2)))) for t in np.append(e - 0.5, e[-1] + 0.5)])
        w = np.diff(cdf)
        return w / w.sum()

    def pmf(self) -> np.ndarray:
        """Probability vector over Z_q."""
        out = np.zeros(self.q)
        np.add.at(out, np.mod(self.support(), self.q), self.weights())
        return out


def sample_error(chi: ErrorDistribution, rng: np.random.Generator, size=None):
    """Draw signed errors from ``chi``; reduce with ``% q`` where needed."""
    shape = () if size is None else size
    if chi.eta == 0:
        out = np.zeros(shape, dtype=np.int64)
    elif chi.kind == "bounded_uniform":
        out = rng.integers(-chi.eta, chi.eta + 1, size=shape)
    else:
        count = int(np.prod(shape))
        draws = np.empty(0, dtype=np.int64)
        while draws.size < count:
            x = np.rint(rng.normal(0.0, chi.width, size=max(2 * (count - draws.size), 16))).astype(np.int64)
            draws = np.concatenate([draws, x[np.abs(x) <= chi.eta]])
        out = draws[:count].reshape(shape)
    return int(out) if size is None else out


EULER_GAMMA_EXP = math.exp(0.5772156649015329)


def rosser_schoenfeld_bound(q):
    """Lower bound 1 / (e^gamma ln ln q + 3 / ln ln q) on phi(q)/q, valid for q >= 3."""
    ll = np.log(np.log(np.asarray(q, dtype=np.float64)))
    return 1.0 / (EULER_GAMMA_EXP * ll + 3.0 / ll)


def check_rosser_schoenfeld(limit: int) -> dict:
    """Verify phi(q)/q > bound for every q in [3, limit] using the sieve."""
    if limit < 3:
        raise ValueError("limit must be at least 3")
    phi = totient_table(limit)
    q = np.arange(3, limit + 1)
    ratio = phi[3:] / q
    margin = ratio - rosser_schoenfeld_bound(q)
    worst = int(np.argmin(margin))
    return {
        "limit": limit,
        "checked": int(q.size),
        "violations": q[margin <= 0].tolist(),
        "min_margin": float(margin[worst]),
        "argmin": int(q[worst]),
        "passed": bool(np.all(margin > 0)),
    }
