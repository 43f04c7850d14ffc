"""Symmetric-key encryption schemes: the PRF scheme, LWE bit encryption and
the periodized PRF scheme.

Messages and randomness for the PRF schemes are unsigned integers whose bit
``j`` is bit ``j`` of the string (little-endian). Serialized keys and
ciphers are a sequence of fields, each a 4-byte little-endian length
followed by that many bytes:

* PRF key: one field, the raw key bytes.
* periodized PRF key: key bytes, then p as a 4-byte little-endian integer.
* PRF cipher: r, then the masked message, each ceil(bits / 8) bytes little-endian.
* LWE key: n entries of 4 bytes each, little-endian.
* LWE cipher: the vector a (same layout as a key), then c as 4 bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .errors import DimensionError
from .modmath import ErrorDistribution, circular_distance, sample_error, sample_prime

KEY_BYTES = 32


def _nbytes(bits: int) -> int:
    return max(1, (bits + 7) // 8)


def int_to_bits(x: int, length: int) -> np.ndarray:
    return np.array([(x >> j) & 1 for j in range(length)], dtype=np.uint8)


def bits_to_int(bits) -> int:
    return sum(int(b) << j for j, b in enumerate(bits))


def pack_fields(*fields: bytes) -> bytes:
    return b"".join(struct.pack("<I", len(f)) + f for f in fields)


def unpack_fields(blob: bytes) -> list[bytes]:
    out, pos = [], 0
    while pos < len(blob):
        if pos + 4 > len(blob):
            raise ValueError("truncated length prefix")
        (size,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        if pos + size > len(blob):
            raise ValueError("truncated field")
        out.append(blob[pos : pos + size])
        pos += size
    return out


class PrfFamily:
    """Keyed BLAKE2b as a function family {0,1}^in_bits -> {0,1}^out_bits.

    The input is hashed as ceil(in_bits/8) little-endian bytes together with
    a 4-byte block counter; blocks are concatenated until ``out_bits`` bits
    are available and the surplus high bits are dropped.
    """

    def __init__(self, in_bits: int, out_bits: int, person: bytes = b"quditlab-prf"):
        if in_bits < 1 or out_bits < 1:
            raise ValueError("bit lengths must be positive")
        self.in_bits = in_bits
        self.out_bits = out_bits
        self.person = person[:16]

    def keygen(self, rng: np.random.Generator) -> bytes:
        return rng.bytes(KEY_BYTES)

    def __call__(self, key: bytes, x: int) -> int:
        if not 0 <= x < 1 << self.in_bits:
            raise ValueError(f"input {x} does not fit in {self.in_bits} bits")
        msg = x.to_bytes(_nbytes(self.in_bits), "little")
        need = _nbytes(self.out_bits)
        out = b""
        block = 0
        while len(out) < need:
            h = hashlib.blake2b(msg + struct.pack("<I", block), key=key, digest_size=64, person=self.person)
            out += h.digest()
            block += 1
        return int.from_bytes(out[:need], "little") & ((1 << self.out_bits) - 1)


@dataclass(frozen=True)
class Scheme:
    """A symmetric-key encryption scheme (KeyGen, Enc, Dec) plus metadata.

    ``message_bits`` describes the message space {0,1}^message_bits, encoded
    as integers. ``lossy`` marks parameter choices where Dec(Enc(m)) = m is
    not guaranteed.
    """

    name: str
    message_bits: int
    keygen: Callable[[np.random.Generator], Any]
    enc: Callable[[Any, int, np.random.Generator], Any]
    dec: Callable[[Any, Any], Any]
    key_to_bytes: Callable[[Any], bytes]
    cipher_to_bytes: Callable[[Any], bytes]
    lossy: bool = False
    params: dict | None = None

    def random_message(self, rng: np.random.Generator) -> int:
        return int.from_bytes(rng.bytes(_nbytes(self.message_bits)), "little") & ((1 << self.message_bits) - 1)


def _check_message(m: int, bits: int):
    if not isinstance(m, (int, np.integer)) or not 0 <= m < 1 << bits:
        raise DimensionError(f"message must be a {bits}-bit string")


def prf_scheme(family: PrfFamily, name: str = "prf") -> Scheme:
    """Enc_k(m; r) = (r, f_k(r) xor m) with fresh uniform r."""
    in_bits, out_bits = family.in_bits, family.out_bits

    def enc(key, m, rng):
        _check_message(m, out_bits)
        r = int.from_bytes(rng.bytes(_nbytes(in_bits)), "little") & ((1 << in_bits) - 1)
        return (r, family(key, r) ^ int(m))

    def dec(key, cipher):
        r, c = cipher
        _check_message(c, out_bits)
        return family(key, r) ^ c

    def cipher_bytes(cipher):
        r, c = cipher
        return pack_fields(r.to_bytes(_nbytes(in_bits), "little"), c.to_bytes(_nbytes(out_bits), "little"))

    return Scheme(name, out_bits, family.keygen, enc, dec, lambda k: pack_fields(k), cipher_bytes, False, {"in_bits": in_bits})


@dataclass(frozen=True)
class PeriodicKey:
    key: bytes
    p: int


def periodized_prf_scheme(family: PrfFamily | None, n: int) -> Scheme:
    """PRF scheme over 2n+3-bit strings using f'(x) = f_k(x mod p).

    ``family`` must map n bits to 2n+3 bits; pass None for the default BLAKE2b
    family. The key is (k, p) with p a uniform prime in [2^n / 2, 2^n).
    Strings are read as unsigned little-endian integers before reducing mod p.
    """
    if n < 2:
        raise ValueError("periodized scheme needs n >= 2")
    width = 2 * n + 3
    family = PrfFamily(n, width) if family is None else family
    if family.in_bits != n or family.out_bits != width:
        raise DimensionError(f"family must map {n} bits to {width} bits")

    def keygen(rng):
        return PeriodicKey(family.keygen(rng), sample_prime(n, rng))

    def f_prime(key: PeriodicKey, x: int) -> int:
        return family(key.key, x % key.p)

    def enc(key, m, rng):
        _check_message(m, width)
        r = int.from_bytes(rng.bytes(_nbytes(width)), "little") & ((1 << width) - 1)
        return (r, f_prime(key, r) ^ int(m))

    def dec(key, cipher):
        r, c = cipher
        return f_prime(key, r) ^ c

    def key_bytes(key):
        return pack_fields(key.key, struct.pack("<I", key.p))

    def cipher_bytes(cipher):
        r, c = cipher
        return pack_fields(r.to_bytes(_nbytes(width), "little"), c.to_bytes(_nbytes(width), "little"))

    scheme = Scheme("periodized-prf", width, keygen, enc, dec, key_bytes, cipher_bytes, False, {"n": n})
    object.__setattr__(scheme, "f_prime", f_prime)
    return scheme


def lwe_decrypt(key: np.ndarray, a: np.ndarray, c, q: int):
    """0 iff the centered distance between c and <a, k> is at most floor(q/4).

    ``c`` may be an array of ciphertext values sharing the same ``a``.
    """
    inner = int(np.dot(np.asarray(a, dtype=np.int64), key) % q)
    dist = circular_distance(c, inner, q)
    return (dist > q // 4).astype(np.int64) if np.ndim(dist) else int(dist > q // 4)


def lwe_is_lossy(q: int, eta: int) -> bool:
    """True if some |e| <= eta and bit b make Dec(Enc(b)) != b."""
    half, band = q // 2, q // 4
    for e in range(-eta, eta + 1):
        for b in (0, 1):
            dist = int(circular_distance(b * half + e, 0, q))
            if (dist > band) != bool(b):
                return True
    return False


def lwe_skes(n: int, q: int, chi: ErrorDistribution, name: str = "lwe-skes") -> Scheme:
    """Enc_k(b) = (a, <a,k> + b*floor(q/2) + e) with a uniform and e ~ chi."""
    if q < 5:
        raise ValueError("LWE encryption needs q >= 5")
    if n < 1:
        raise ValueError("n must be positive")
    if chi.q != q:
        raise ValueError("error distribution modulus differs from q")

    def keygen(rng):
        return rng.integers(0, q, size=n)

    def enc(key, b, rng):
        if b not in (0, 1):
            raise DimensionError("LWE encryption takes single bits")
        a = rng.integers(0, q, size=n)
        e = sample_error(chi, rng)
        return (a, int((np.dot(a, key) + b * (q // 2) + e) % q))

    def dec(key, cipher):
        a, c = cipher
        return lwe_decrypt(key, a, c, q)

    def vec_bytes(v):
        return b"".join(struct.pack("<I", int(x)) for x in v)

    def cipher_bytes(cipher):
        a, c = cipher
        return pack_fields(vec_bytes(a), struct.pack("<I", int(c)))

    return Scheme(
        name,
        1,
        keygen,
        enc,
        dec,
        lambda k: pack_fields(vec_bytes(k)),
        cipher_bytes,
        lwe_is_lossy(q, chi.eta),
        {"n": n, "q": q, "eta": chi.eta, "kind": chi.kind},
    )


__all__ = [
    "PrfFamily",
    "PeriodicKey",
    "Scheme",
    "bits_to_int",
    "int_to_bits",
    "lwe_decrypt",
    "lwe_is_lossy",
    "lwe_skes",
    "pack_fields",
    "periodized_prf_scheme",
    "prf_scheme",
    "unpack_fields",
]
