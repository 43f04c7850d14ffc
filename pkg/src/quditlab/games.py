"""Security games: IND-CPA / IND-CCA1 harness, decryption-access key
recovery against LWE encryption, and the classical and quantum relabeling
experiments.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import AccessViolation, CapExceeded, DimensionError
from .modmath import circular_distance
from .oracles import OracleSpec, membership_permutation
from .schemes import Scheme, lwe_decrypt
from .state import QuditState, UnitaryOp, apply_unitary, cnot_matrix, trace_distance

STATEVECTOR_CAP = 2**20
WILSON_Z99 = 2.5758293035489004


def wilson_interval(wins: int, trials: int, z: float = WILSON_Z99) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = wins / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def hoeffding_budget(delta: float, c: float = 1.0, eps: float = 0.5) -> int:
    """Samples M with 2 exp(-2 M eps^2 / c^2) <= delta for i.i.d. range-c samples."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if eps <= 0 or c <= 0:
        raise ValueError("eps and c must be positive")
    # the slack absorbs rounding in cases like delta = 2 e^-2 that land exactly on an integer
    return max(1, math.ceil(c * c * math.log(2 / delta) / (2 * eps * eps) - 1e-9))


# ---------------------------------------------------------------- IND games


class Oracles:
    """Phase-aware Enc/Dec access handed to an adversary."""

    def __init__(self, scheme: Scheme, key, rng: np.random.Generator, allow_dec: bool):
        self._scheme = scheme
        self._key = key
        self._rng = rng
        self._dec_open = allow_dec
        self.has_dec = allow_dec
        self.log: list[tuple[str, int]] = []

    @property
    def scheme(self) -> Scheme:
        return self._scheme

    def enc(self, m):
        self.log.append(("enc", 1))
        return self._scheme.enc(self._key, m, self._rng)

    def dec(self, cipher, count: int = 1):
        """Decrypt one cipher; ``count`` records how many queries a batched cipher stands for."""
        if not self._dec_open:
            raise AccessViolation("decryption oracle is not available in this phase")
        self.log.append(("dec", count))
        return self._scheme.dec(self._key, cipher)

    def close_dec(self):
        self._dec_open = False

    def queries(self) -> dict:
        out = {"enc": 0, "dec": 0}
        for kind, count in self.log:
            out[kind] += count
        return out


class Adversary:
    """Two-phase IND adversary.

    ``choose`` sees the pre-challenge oracles and returns (m0, m1);
    ``guess`` sees the challenge cipher and the post-challenge oracles.
    """

    name = "adversary"

    def choose(self, oracles: Oracles, rng: np.random.Generator) -> tuple[int, int]:
        return (0, 1)

    def guess(self, challenge, oracles: Oracles, rng: np.random.Generator) -> int:
        raise NotImplementedError


class RandomGuess(Adversary):
    name = "random-guess"

    def guess(self, challenge, oracles, rng):
        return int(rng.integers(2))


class Replay(Adversary):
    """Re-encrypts m0 and compares ciphers; fresh randomness makes this useless."""

    name = "replay"

    def choose(self, oracles, rng):
        self._m = (0, oracles.scheme.random_message(rng) | 1)
        return self._m

    def guess(self, challenge, oracles, rng):
        again = oracles.enc(self._m[0])
        same = oracles.scheme.cipher_to_bytes(again) == oracles.scheme.cipher_to_bytes(challenge)
        return 0 if same else int(rng.integers(2))


class PostChallengeDec(Adversary):
    """Tries to decrypt the challenge directly; the CCA1 harness must refuse."""

    name = "post-challenge-dec"

    def guess(self, challenge, oracles, rng):
        return int(oracles.dec(challenge))


class KeyRecoveryAdversary(Adversary):
    """Recovers an LWE key through the Dec oracle, then decrypts the challenge.

    Without decryption access it falls back to a coin flip.
    """

    name = "key-recovery"

    def __init__(self, M: int | None = None, delta: float = 0.01, estimator: str = "band"):
        self.M = M
        self.delta = delta
        self.estimator = estimator
        self._key = None

    def choose(self, oracles, rng):
        self._key = None
        if oracles.has_dec:
            p = oracles.scheme.params
            n, q = p["n"], p["q"]
            M = self.M if self.M is not None else keyrec_budget(n, q, self.delta)
            self._key = key_recovery_attack(lambda a, c: oracles.dec((a, c), count=np.size(c)), n, q, M, rng, self.estimator)
        return (0, 1)

    def guess(self, challenge, oracles, rng):
        if self._key is None:
            return int(rng.integers(2))
        a, c = challenge
        return int(lwe_decrypt(self._key, a, c, oracles.scheme.params["q"]))


@dataclass
class GameTranscript:
    seed: int
    trial: int
    scheme: str
    mode: str
    queries: dict
    challenge: dict
    guess: int | None
    win: bool
    aborted: bool = False
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class GameReport:
    scheme: str
    adversary: str
    mode: str
    trials: int
    wins: int
    aborted: int
    ci: tuple[float, float]
    transcripts: list[GameTranscript] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return self.trials - self.aborted

    @property
    def win_rate(self) -> float:
        return self.wins / self.completed if self.completed else float("nan")

    def dump_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for t in self.transcripts:
                fh.write(t.to_json() + "\n")


def run_ind_game(scheme: Scheme, adversary: Adversary, mode: str, trials: int, seed: int = 0) -> GameReport:
    """Play ``trials`` independent games with a fresh key and bit each time.

    In CCA1 mode the Dec oracle is open before the challenge and closed after;
    an adversary hitting the closed oracle aborts its trial, which is logged
    and excluded from the win rate. CPA mode never offers Dec.
    """
    mode = mode.upper()
    if mode not in ("CPA", "CCA1"):
        raise ValueError("mode must be CPA or CCA1")
    if scheme.message_bits < 1:
        raise ValueError("message space needs two distinct messages")
    seqs = np.random.SeedSequence(seed).spawn(trials)
    wins = aborted = 0
    transcripts = []
    for t, seq in enumerate(seqs):
        rng = np.random.default_rng(seq)
        key = scheme.keygen(rng)
        b = int(rng.integers(2))
        oracles = Oracles(scheme, key, rng, allow_dec=(mode == "CCA1"))
        challenge_info: dict = {"b": b}
        try:
            m0, m1 = adversary.choose(oracles, rng)
            if m0 == m1:
                raise ValueError("challenge messages must differ")
            oracles.close_dec()
            cipher = scheme.enc(key, (m0, m1)[b], rng)
            challenge_info.update(m0=int(m0), m1=int(m1), cipher=scheme.cipher_to_bytes(cipher).hex())
            guess = int(adversary.guess(cipher, oracles, rng))
        except AccessViolation as exc:
            aborted += 1
            transcripts.append(GameTranscript(seed, t, scheme.name, mode, oracles.queries(), challenge_info, None, False, True, str(exc)))
            continue
        win = guess == b
        wins += win
        transcripts.append(GameTranscript(seed, t, scheme.name, mode, oracles.queries(), challenge_info, guess, win))
    return GameReport(scheme.name, adversary.name, mode, trials, wins, aborted, wilson_interval(wins, trials - aborted), transcripts)


# ---------------------------------------------------------------- key recovery


def keyrec_budget(n: int, q: int, delta: float) -> int:
    """Per-coordinate query count: Hoeffding with range ceil(q/2), accuracy 1/2, union bound over n."""
    return hoeffding_budget(delta / n, c=math.ceil(q / 2), eps=0.5)


def _band_estimate(c: np.ndarray, b: np.ndarray, q: int) -> int:
    """Candidate key entry whose Dec rule best explains the observed (c, b) pairs."""
    cand = np.arange(q)
    pred = circular_distance(c[None, :], cand[:, None], q) > q // 4
    agree = (pred == b[None, :].astype(bool)).sum(axis=1)
    best = np.flatnonzero(agree == agree.max())
    if best.size == 1:
        return int(best[0])
    # ties: prefer the candidate closest to the circular mean of the samples
    ref = _circular_mean_estimate(c, b, q)
    return int(best[np.argmin(circular_distance(best, ref, q))])


def _circular_mean_estimate(c: np.ndarray, b: np.ndarray, q: int) -> int:
    X = (c - b * (q // 2)) % q
    angle = np.angle(np.mean(np.exp(2j * np.pi * X / q)))
    return int(np.rint(angle * q / (2 * np.pi))) % q


def _plain_mean_estimate(c: np.ndarray, b: np.ndarray, q: int) -> int:
    X = (c - b * (q // 2)) % q
    return int(np.rint(X.mean())) % q


ESTIMATORS = {"band": _band_estimate, "circular-mean": _circular_mean_estimate, "mean": _plain_mean_estimate}


def key_recovery_attack(
    dec_oracle: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n: int,
    q: int,
    M: int,
    rng: np.random.Generator,
    estimator: str = "band",
) -> np.ndarray:
    """Recover k coordinate by coordinate from decryption queries (e_i, c_m).

    ``dec_oracle(a, c)`` decrypts the batch of ciphers (a, c[j]) and returns
    the bits. ``estimator`` is ``"band"`` (default), ``"circular-mean"`` or
    ``"mean"`` (arithmetic mean of X = c - b floor(q/2), no wrap handling).
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    try:
        est = ESTIMATORS[estimator]
    except KeyError:
        raise ValueError(f"unknown estimator {estimator!r}") from None
    key = np.zeros(n, dtype=np.int64)
    for i in range(n):
        a = np.zeros(n, dtype=np.int64)
        a[i] = 1
        c = rng.integers(0, q, size=M)
        b = np.asarray(dec_oracle(a, c), dtype=np.int64).reshape(M)
        key[i] = est(c, b, q)
    return key


@dataclass
class KeyRecoveryReport:
    runs: int
    recovered: int
    M: int
    ci: tuple[float, float]

    @property
    def rate(self) -> float:
        return self.recovered / self.runs


def key_recovery_experiment(scheme: Scheme, runs: int, M: int | None = None, delta: float = 0.01, seed: int = 0, estimator: str = "band") -> KeyRecoveryReport:
    n, q = scheme.params["n"], scheme.params["q"]
    M = keyrec_budget(n, q, delta) if M is None else M
    ok = 0
    for seq in np.random.SeedSequence(seed).spawn(runs):
        rng = np.random.default_rng(seq)
        key = scheme.keygen(rng)
        guess = key_recovery_attack(lambda a, c: lwe_decrypt(key, a, c, q), n, q, M, rng, estimator)
        ok += bool(np.array_equal(guess, key))
    return KeyRecoveryReport(runs, ok, M, wilson_interval(ok, runs))


# ---------------------------------------------------------------- classical relabeling


@dataclass
class ClassicalRelabelReport:
    n: int
    m: int
    T: int
    mode: str
    win_prob: Fraction | float
    advantage: Fraction | float
    bound: Fraction
    proof_value: Fraction
    note: str = ""
    ci: tuple[float, float] | None = None

    @property
    def within_bound(self) -> bool:
        return self.advantage <= self.bound


def _random_table(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2**m, size=2**n)


def classical_relabeling(
    n: int,
    m: int,
    T: int,
    f: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    mode: str = "exhaustive",
    trials: int = 10_000,
) -> ClassicalRelabelReport:
    """Advantage of the query-then-compare distinguisher in the classical relabeling game.

    The distinguisher queries T distinct inputs. If r* is among them it
    answers 0 exactly when the challenge value matches f(r*); otherwise the
    challenge value carries no information (f is unknown to it) and it
    answers 0. Exhaustive mode enumerates r*, s and b with rational
    arithmetic; sampled mode draws random f, r*, s, b.
    """
    if mode not in ("exhaustive", "sampled"):
        raise ValueError("mode must be 'exhaustive' or 'sampled'")
    if T < 0:
        raise ValueError("T must be non-negative")
    N = 2**n
    note = ""
    if T > N:
        note = f"T={T} capped at 2^n={N}"
        T = N
    bound = Fraction(T, N)
    proof_value = Fraction(T, N) + Fraction(1, 2) * (1 - Fraction(T, N))
    rng = np.random.default_rng(0) if rng is None else rng
    if mode == "exhaustive":
        if n > 12:
            raise CapExceeded("exhaustive mode supports n <= 12")
        table = _random_table(n, m, rng) if f is None else np.asarray(f)
        queried = np.zeros(N, dtype=bool)
        queried[:T] = True  # any T distinct inputs, r* is uniform
        wins = 0
        for r in range(N):
            fr = int(table[r])
            for s in range(2**m):
                for b in (0, 1):
                    y = fr ^ (s if b else 0)
                    guess = (0 if y == fr else 1) if queried[r] else 0
                    wins += guess == b
        win = Fraction(wins, N * 2**m * 2)
        return ClassicalRelabelReport(n, m, T, mode, win, win - Fraction(1, 2), bound, proof_value, note)
    wins = 0
    for _ in range(trials):
        table = _random_table(n, m, rng) if f is None else np.asarray(f)
        r = int(rng.integers(N))
        s = int(rng.integers(2**m))
        b = int(rng.integers(2))
        queries = rng.choice(N, size=T, replace=False) if T else np.empty(0, dtype=np.int64)
        y = int(table[r]) ^ (s if b else 0)
        guess = (0 if y == int(table[r]) else 1) if r in set(queries.tolist()) else 0
        wins += guess == b
    lo, hi = wilson_interval(wins, trials)
    return ClassicalRelabelReport(n, m, T, mode, wins / trials, wins / trials - 0.5, bound, proof_value, note, (lo - 0.5, hi - 0.5))


def classical_exact_advantage(n: int, m: int, T: int) -> Fraction:
    """Closed form (T / 2^n) * (1 - 2^-m) / 2 for the same distinguisher."""
    T = min(T, 2**n)
    return Fraction(T, 2**n) * (1 - Fraction(1, 2**m)) / 2


# ---------------------------------------------------------------- quantum relabeling


@dataclass(frozen=True)
class RelabelConfig:
    n: int
    m: int
    mu: int
    T: int
    f: tuple | None = None

    def __post_init__(self):
        if not 0 <= self.mu <= self.n:
            raise ValueError("need 0 <= mu <= n")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if 2 ** (self.n + self.m) > STATEVECTOR_CAP:
            raise CapExceeded(f"2^(n+m) = {2 ** (self.n + self.m)} exceeds the statevector cap {STATEVECTOR_CAP}")
        if self.f is not None and len(self.f) != 2**self.n:
            raise DimensionError("f must list 2^n outputs")

    @property
    def bound(self) -> float:
        return 2 * self.T / math.sqrt(2**self.mu)


def relabeled_table(table: np.ndarray, n: int, mu: int, r_star: int, s: int) -> np.ndarray:
    """f xor s on the inputs whose top mu bits equal r_star."""
    x = np.arange(2**n)
    hit = (x >> (n - mu)) == r_star if mu else np.ones(2**n, dtype=bool)
    out = np.array(table, dtype=np.int64).copy()
    out[hit] ^= s
    return out


def _random_su2(rng: np.random.Generator) -> np.ndarray:
    a, b, c = rng.uniform(0, 2 * np.pi, size=3)
    rz = lambda t: np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    ry = np.array([[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]])
    return rz(a) @ ry @ rz(c)


class RandomCircuit:
    """T+1 layers; each is a random single-qubit rotation on every qubit
    followed by a CNOT chain 0->1->...->w-1."""

    def __init__(self, width: int, T: int, rng: np.random.Generator):
        self.width = width
        self.T = T
        self.layers = [[_random_su2(rng) for _ in range(width)] for _ in range(T + 1)]

    def apply_layer(self, state: QuditState, t: int) -> QuditState:
        for j, U in enumerate(self.layers[t]):
            state = apply_unitary(state, UnitaryOp((j,), U))
        cx = cnot_matrix()
        for j in range(self.width - 1):
            state = apply_unitary(state, UnitaryOp((j, j + 1), cx))
        return state

    def run(self, state: QuditState, perm: np.ndarray) -> QuditState:
        """U_T O U_{T-1} ... O U_0 applied to ``state``."""
        state = self.apply_layer(state, 0)
        for t in range(1, self.T + 1):
            amps = np.empty_like(state.amps)
            amps[perm] = state.amps
            state = self.apply_layer(QuditState(2, state.m, amps), t)
        return state


def _oracle_perm(table: np.ndarray, n: int, m: int) -> np.ndarray:
    return membership_permutation(OracleSpec.from_table(n, 2, table, out_digits=m), n + m)


def default_advice(cfg: RelabelConfig, table: np.ndarray, rng: np.random.Generator, queries: int = 1) -> QuditState:
    """Advice state from a short random precomputation under O_f."""
    width = cfg.n + cfg.m
    pre = RandomCircuit(width, queries, rng)
    return pre.run(QuditState.zeros(2, width), _oracle_perm(table, cfg.n, cfg.m))


@dataclass
class RelabelDraw:
    r_star: int
    s: int
    trace_distance: float


def quantum_relabeling_tracedist(
    cfg: RelabelConfig,
    rng: np.random.Generator,
    circuit: RandomCircuit | None = None,
    advice: QuditState | None = None,
    r_star: int | None = None,
    s: int | None = None,
) -> tuple[float, float, RelabelDraw]:
    """Run the same circuit and advice under O_f and O_f*; return (delta, bound, draw)."""
    n, m = cfg.n, cfg.m
    table = np.array(cfg.f, dtype=np.int64) if cfg.f is not None else rng.integers(0, 2**m, size=2**n)
    r_star = int(rng.integers(2**cfg.mu)) if r_star is None else r_star
    s = int(rng.integers(2**m)) if s is None else s
    circuit = RandomCircuit(n + m, cfg.T, rng) if circuit is None else circuit
    if advice is None:
        advice = default_advice(cfg, table, rng)
    psi_f = circuit.run(advice, _oracle_perm(table, n, m))
    psi_g = circuit.run(advice, _oracle_perm(relabeled_table(table, n, cfg.mu, r_star, s), n, m))
    d = trace_distance(psi_f, psi_g)
    return d, cfg.bound, RelabelDraw(r_star, s, d)


@dataclass
class RelabelSweepCell:
    mu: int
    T: int
    draws: int
    mean: float
    max: float
    bound: float
    flagged: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.mean <= self.bound


def quantum_relabeling_sweep(n: int, m: int, mus: Sequence[int], Ts: Sequence[int], draws: int = 100, seed: int = 0) -> list[RelabelSweepCell]:
    """Mean and max trace distance over seeded (r*, s, circuit, f) draws per (mu, T) cell.

    Draws above three times the bound are listed in ``flagged``.
    """
    cells = []
    for mu in mus:
        for T in Ts:
            cfg = RelabelConfig(n, m, mu, T)
            ds, flagged = [], []
            for seq in np.random.SeedSequence([seed, mu, T]).spawn(draws):
                d, bound, draw = quantum_relabeling_tracedist(cfg, np.random.default_rng(seq))
                ds.append(d)
                if d > 3 * bound:
                    flagged.append(draw)
            cells.append(RelabelSweepCell(mu, T, draws, float(np.mean(ds)), float(np.max(ds)), cfg.bound, flagged))
    return cells


def single_query_overlap(n: int, m: int, s: int, phi: QuditState, relabeled: int = 1) -> complex:
    """<psi_f|psi_f*> after one uniform-superposition query with output register phi.

    Equals 1 - |R| 2^-n (1 - <phi|X^s|phi>) where R is the relabeled set.
    """
    flipped = phi.amps[np.arange(2**m) ^ s]
    expect = np.vdot(phi.amps, flipped)
    return 1 - relabeled * 2.0**-n * (1 - expect)


def single_query_states(table: np.ndarray, n: int, m: int, mu: int, r_star: int, s: int, phi: QuditState):
    """Both post-query states for the uniform-superposition input."""
    x_part = np.full(2**n, 2 ** (-n / 2), dtype=np.complex128)
    start = QuditState(2, n + m, np.kron(phi.amps, x_part))
    out = []
    for tab in (table, relabeled_table(table, n, mu, r_star, s)):
        perm = _oracle_perm(tab, n, m)
        amps = np.empty_like(start.amps)
        amps[perm] = start.amps
        out.append(QuditState(2, n + m, amps))
    return out


__all__ = [
    "Adversary",
    "ClassicalRelabelReport",
    "GameReport",
    "GameTranscript",
    "KeyRecoveryAdversary",
    "Oracles",
    "PostChallengeDec",
    "RandomCircuit",
    "RandomGuess",
    "RelabelConfig",
    "Replay",
    "classical_exact_advantage",
    "classical_relabeling",
    "default_advice",
    "hoeffding_budget",
    "key_recovery_attack",
    "key_recovery_experiment",
    "keyrec_budget",
    "quantum_relabeling_sweep",
    "quantum_relabeling_tracedist",
    "relabeled_table",
    "run_ind_game",
    "single_query_overlap",
    "single_query_states",
    "wilson_interval",
]
