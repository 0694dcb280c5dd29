import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab.keyproc.privacy import (bits_to_hex, bits_to_str, expand_seed, privacy_amplify, str_to_bits,
                                    toeplitz_hash, toeplitz_matrix)

bitvecs = st.lists(st.integers(0, 1), min_size=1, max_size=200).map(lambda b: np.array(b, np.uint8))


def test_golden_outputs():
    # frozen so any platform or numpy change in the extractor shows up
    bits = (np.arange(64) % 3 == 0).astype(np.uint8)
    assert bits_to_hex(privacy_amplify(bits, 32, 12345)) == "c879c5d2"
    assert bits_to_hex(expand_seed(7, 64)) == "220e4f9a2b6e10dd"


def test_seed_expansion_is_shake256():
    raw = hashlib.shake_256(b"qkdlab-toeplitz:" + bytes([7])).digest(2)
    expected = np.unpackbits(np.frombuffer(raw, np.uint8), bitorder="little")
    np.testing.assert_array_equal(expand_seed(7, 16), expected)
    np.testing.assert_array_equal(expand_seed(b"\x07", 16), expected)
    with pytest.raises(ValueError):
        expand_seed(-1, 8)


@given(bitvecs, st.integers(1, 40), st.integers(0, 2**40))
def test_fast_hash_equals_dense_product(bits, m, seed):
    diag = expand_seed(seed, len(bits) + m - 1)
    T = toeplitz_matrix(diag, m, len(bits))
    dense = (T.astype(np.int64) @ bits.astype(np.int64)) % 2
    np.testing.assert_array_equal(toeplitz_hash(bits, diag, m), dense)


def test_toeplitz_structure():
    T = toeplitz_matrix(np.arange(7) % 2, 3, 5)
    for i in range(1, 3):
        for j in range(1, 5):
            assert T[i, j] == T[i - 1, j - 1]


@given(bitvecs, bitvecs, st.integers(0, 2**32))
def test_hash_is_linear(a, b, seed):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    m = max(1, n // 2)
    h = lambda x: privacy_amplify(x, m, seed)
    np.testing.assert_array_equal(h(a ^ b), h(a) ^ h(b))


def test_length_checks():
    x = np.ones(10, np.uint8)
    with pytest.raises(ValueError):
        privacy_amplify(x, 11, 0)
    with pytest.raises(ValueError):
        privacy_amplify(x, -1, 0)
    with pytest.raises(ValueError):
        privacy_amplify(x, 5, 0, mode="identity")
    with pytest.raises(ValueError):
        privacy_amplify(x, 5, 0, mode="sha")
    np.testing.assert_array_equal(privacy_amplify(x, 10, 0, mode="identity"), x)
    assert len(privacy_amplify(x, 0, 0)) == 0


def test_collision_rate_small_sample():
    rng = np.random.default_rng(0)
    n, m, trials = 64, 8, 4000
    a = rng.integers(0, 2, n, dtype=np.uint8)
    b = a.copy()
    b[5] ^= 1
    hits = sum(np.array_equal(privacy_amplify(a, m, s), privacy_amplify(b, m, s)) for s in range(trials))
    p = 2.0**-m
    assert abs(hits - trials * p) < 4 * np.sqrt(trials * p * (1 - p))


@given(bitvecs)
def test_bit_string_roundtrip(bits):
    np.testing.assert_array_equal(str_to_bits(bits_to_str(bits)), bits)


def test_hex_is_msb_first():
    assert bits_to_hex(str_to_bits("10000000 1")) == "8080"
    with pytest.raises(ValueError):
        str_to_bits("012")
