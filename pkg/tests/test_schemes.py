import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quditlab.errors import DimensionError
from quditlab.modmath import ErrorDistribution, is_prime
from quditlab.schemes import (
    PrfFamily,
    bits_to_int,
    int_to_bits,
    lwe_decrypt,
    lwe_is_lossy,
    lwe_skes,
    pack_fields,
    periodized_prf_scheme,
    prf_scheme,
    unpack_fields,
)
from reference import lwe_dec_direct


@given(st.integers(0, 2**40 - 1))
def test_bits_roundtrip(x):
    assert bits_to_int(int_to_bits(x, 40)) == x


@given(st.lists(st.binary(max_size=40), max_size=5))
def test_pack_unpack(fields):
    assert unpack_fields(pack_fields(*fields)) == fields


def test_unpack_truncated():
    with pytest.raises(ValueError):
        unpack_fields(struct.pack("<I", 10) + b"abc")
    with pytest.raises(ValueError):
        unpack_fields(b"\x01\x00")


@pytest.mark.parametrize("out_bits", [1, 7, 32, 513, 1200])
def test_prf_is_deterministic_with_exact_length(out_bits):
    fam = PrfFamily(16, out_bits)
    key = fam.keygen(np.random.default_rng(0))
    vals = [fam(key, x) for x in range(50)]
    assert vals == [fam(key, x) for x in range(50)]
    assert all(0 <= v < 2**out_bits for v in vals)
    if out_bits >= 32:
        assert max(v.bit_length() for v in vals) > out_bits - 8


def test_prf_key_separates_outputs():
    fam = PrfFamily(16, 64)
    rng = np.random.default_rng(1)
    k1, k2 = fam.keygen(rng), fam.keygen(rng)
    assert fam(k1, 5) != fam(k2, 5)
    with pytest.raises(ValueError):
        fam(k1, 2**16)


def test_prf_avalanche():
    fam = PrfFamily(32, 64)
    rng = np.random.default_rng(2)
    key = fam.keygen(rng)
    changed = []
    for _ in range(1000):
        x = int(rng.integers(2**32))
        bit = int(rng.integers(32))
        changed.append(bin(fam(key, x) ^ fam(key, x ^ (1 << bit))).count("1") / 64)
    assert np.mean(changed) >= 0.25


def test_prf_scheme_roundtrip_and_zero_message():
    fam = PrfFamily(32, 32)
    scheme = prf_scheme(fam)
    rng = np.random.default_rng(3)
    for _ in range(1000):
        key = scheme.keygen(rng)
        m = scheme.random_message(rng)
        assert scheme.dec(key, scheme.enc(key, m, rng)) == m
    key = scheme.keygen(rng)
    r, c = scheme.enc(key, 0, rng)
    assert c == fam(key, r)


def test_prf_scheme_fresh_randomness():
    scheme = prf_scheme(PrfFamily(32, 32))
    rng = np.random.default_rng(4)
    key = scheme.keygen(rng)
    rs = {scheme.enc(key, 7, rng)[0] for _ in range(1000)}
    # birthday bound: about 1000^2 / 2^33 ~ 1e-4 expected collisions
    assert len(rs) == 1000


def test_prf_scheme_length_mismatch():
    scheme = prf_scheme(PrfFamily(8, 8))
    key = scheme.keygen(np.random.default_rng(0))
    with pytest.raises(DimensionError):
        scheme.enc(key, 256, np.random.default_rng(0))


def test_prf_cipher_serialization_layout():
    scheme = prf_scheme(PrfFamily(12, 20))
    blob = scheme.cipher_to_bytes((0x0ABC, 0x12345))
    r, c = unpack_fields(blob)
    assert r == (0x0ABC).to_bytes(2, "little") and c == (0x12345).to_bytes(3, "little")
    assert unpack_fields(scheme.key_to_bytes(b"k" * 32)) == [b"k" * 32]


def test_periodized_hidden_period():
    scheme = periodized_prf_scheme(None, 4)
    rng = np.random.default_rng(5)
    key = scheme.keygen(rng)
    p = key.p
    assert 8 <= p < 16 and is_prime(p)
    fam = PrfFamily(4, 11)
    for x in range(p):
        assert scheme.f_prime(key, x) == fam(key.key, x)
    assert scheme.f_prime(key, p) == fam(key.key, 0)
    for _ in range(1000):
        x = int(rng.integers(2**11 - p))
        assert scheme.f_prime(key, x) == scheme.f_prime(key, x + p)


def test_periodized_with_p13():
    from quditlab.schemes import PeriodicKey

    scheme = periodized_prf_scheme(None, 4)
    key = PeriodicKey(b"\x07" * 32, 13)
    rng = np.random.default_rng(6)
    for x in rng.integers(0, 2**11 - 13, size=1000):
        assert scheme.f_prime(key, int(x)) == scheme.f_prime(key, int(x) + 13)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_periodized_roundtrip(n):
    scheme = periodized_prf_scheme(None, n)
    assert scheme.message_bits == 2 * n + 3
    rng = np.random.default_rng(n)
    for _ in range(300):
        key = scheme.keygen(rng)
        m = scheme.random_message(rng)
        assert scheme.dec(key, scheme.enc(key, m, rng)) == m
    key = scheme.keygen(rng)
    fields = unpack_fields(scheme.key_to_bytes(key))
    assert struct.unpack("<I", fields[1])[0] == key.p


def test_periodized_validation():
    with pytest.raises(ValueError):
        periodized_prf_scheme(None, 1)
    with pytest.raises(DimensionError):
        periodized_prf_scheme(PrfFamily(4, 10), 4)


def test_lwe_decrypt_examples():
    key = np.array([3, 5])
    a = np.array([1, 0])
    # e = 0, b = 0: c = <a, k>
    assert lwe_decrypt(key, a, 3, 23) == 0
    # e = 0, b = 1: distance 11 > 5
    assert lwe_decrypt(key, a, (3 + 11) % 23, 23) == 1
    assert lwe_decrypt(key, a, np.array([3, 8, 9, 21]), 23).tolist() == [0, 0, 1, 0]


@settings(max_examples=200)
@given(st.integers(5, 40), st.data())
def test_lwe_decrypt_matches_direct(q, data):
    key = data.draw(st.lists(st.integers(0, q - 1), min_size=3, max_size=3))
    a = data.draw(st.lists(st.integers(0, q - 1), min_size=3, max_size=3))
    c = data.draw(st.integers(0, q - 1))
    assert lwe_decrypt(np.array(key), np.array(a), c, q) == lwe_dec_direct(key, a, c, q)


@pytest.mark.parametrize("q", range(5, 40))
def test_lossy_flag_matches_roundtrip_enumeration(q):
    for eta in range(0, q // 2):
        fails = any(
            lwe_dec_direct([0], [0], (b * (q // 2) + e) % q, q) != b for b in (0, 1) for e in range(-eta, eta + 1)
        )
        assert lwe_is_lossy(q, eta) == fails


@pytest.mark.parametrize("q", [23, 27, 31])
def test_lwe_exact_under_quarter_bound(q):
    # q = 3 mod 4 or 2 mod 4 keeps eta = floor(q/4) lossless
    assert not lwe_is_lossy(q, q // 4)


def test_lwe_quarter_bound_lossy_when_q_is_1_mod_4():
    assert lwe_is_lossy(13, 3)
    assert not lwe_is_lossy(13, 2)


def test_lwe_roundtrip_10k():
    scheme = lwe_skes(8, 23, ErrorDistribution("bounded_uniform", 5, 23))
    rng = np.random.default_rng(7)
    key = scheme.keygen(rng)
    fails = 0
    for _ in range(10_000):
        b = int(rng.integers(2))
        fails += scheme.dec(key, scheme.enc(key, b, rng)) != b
    assert fails == 0 and not scheme.lossy


def test_lwe_validation_and_serialization():
    chi = ErrorDistribution("bounded_uniform", 1, 23)
    with pytest.raises(ValueError):
        lwe_skes(4, 3, ErrorDistribution("bounded_uniform", 1, 3))
    with pytest.raises(ValueError):
        lwe_skes(4, 23, ErrorDistribution("bounded_uniform", 1, 29))
    scheme = lwe_skes(3, 23, chi)
    with pytest.raises(DimensionError):
        scheme.enc(np.zeros(3, dtype=int), 2, np.random.default_rng(0))
    a_field, c_field = unpack_fields(scheme.cipher_to_bytes((np.array([1, 2, 22]), 17)))
    assert struct.unpack("<3I", a_field) == (1, 2, 22) and struct.unpack("<I", c_field) == (17,)
    assert lwe_skes(3, 23, ErrorDistribution("bounded_uniform", 9, 23)).lossy
