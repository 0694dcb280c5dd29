"""Toeplitz-hash privacy amplification.

The m x n Toeplitz matrix is fixed by its first column and row, i.e. by
n + m - 1 bits, which are expanded from a short seed with SHAKE-256 so the
output is identical on every platform.
"""
from __future__ import annotations

import hashlib

import numpy as np


def expand_seed(seed: int | bytes, nbits: int) -> np.ndarray:
    """Deterministic pseudorandom bit vector of length ``nbits`` from ``seed``."""
    if isinstance(seed, int):
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        seed = seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "little")
    raw = hashlib.shake_256(b"qkdlab-toeplitz:" + seed).digest((nbits + 7) // 8)
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:nbits]


def toeplitz_matrix(diagonals: np.ndarray, m: int, n: int) -> np.ndarray:
    """Dense m x n Toeplitz matrix with T[i, j] = diagonals[i - j + n - 1]."""
    idx = np.arange(m)[:, None] - np.arange(n)[None, :] + n - 1
    return np.asarray(diagonals, dtype=np.uint8)[idx]


def toeplitz_hash(bits, diagonals: np.ndarray, m: int) -> np.ndarray:
    """Compute T @ bits over GF(2) without forming T.

    Row i of the product is sum_j diagonals[i - j + n - 1] * bits[j], which is
    entry i + n - 1 of the integer convolution of ``diagonals`` with ``bits``.
    """
    x = np.asarray(bits, dtype=np.int64)
    n = len(x)
    if len(diagonals) != n + m - 1:
        raise ValueError("need n + m - 1 defining bits")
    full = np.convolve(np.asarray(diagonals, dtype=np.int64), x)
    return (full[n - 1:n - 1 + m] & 1).astype(np.uint8)


def privacy_amplify(bits, final_length: int, seed: int | bytes, mode: str = "toeplitz") -> np.ndarray:
    """Compress ``bits`` to ``final_length`` bits with a seeded Toeplitz hash.

    ``mode="identity"`` returns the input unchanged and is only allowed when
    ``final_length`` equals the input length (test hook).
    """
    x = np.asarray(bits, dtype=np.uint8)
    n = len(x)
    if final_length > n:
        raise ValueError(f"final_length {final_length} exceeds input length {n}")
    if final_length < 0:
        raise ValueError("final_length must be nonnegative")
    if mode == "identity":
        if final_length != n:
            raise ValueError("identity mode needs final_length == input length")
        return x.copy()
    if mode != "toeplitz":
        raise ValueError(f"unknown mode {mode!r}")
    if final_length == 0:
        return np.zeros(0, dtype=np.uint8)
    diag = expand_seed(seed, n + final_length - 1)
    return toeplitz_hash(x, diag, final_length)


def bits_to_hex(bits) -> str:
    """Lowercase hex of a bit string, MSB first, zero-padded at the end to whole bytes."""
    b = np.asarray(bits, dtype=np.uint8)
    return np.packbits(b, bitorder="big").tobytes().hex()


def bits_to_str(bits) -> str:
    return "".join("1" if v else "0" for v in np.asarray(bits, dtype=np.uint8))


def str_to_bits(s: str) -> np.ndarray:
    s = "".join(s.split())
    if set(s) - {"0", "1"}:
        raise ValueError("bit string may only contain 0 and 1")
    return np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
