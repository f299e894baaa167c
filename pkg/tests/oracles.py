"""Independent reference implementations used by the tests.

Everything here is written from scratch with Python integers or plain
floats, so it shares no code with the package under test.
"""
from __future__ import annotations

import math
import struct

import numpy as np

MOD = 1 << 64


# --- ChaCha20 block function (RFC 8439), pure Python -------------------------

def _rotl(v, c):
    return ((v << c) & 0xFFFFFFFF) | (v >> (32 - c))


def _qr(s, a, b, c, d):
    s[a] = (s[a] + s[b]) & 0xFFFFFFFF
    s[d] = _rotl(s[d] ^ s[a], 16)
    s[c] = (s[c] + s[d]) & 0xFFFFFFFF
    s[b] = _rotl(s[b] ^ s[c], 12)
    s[a] = (s[a] + s[b]) & 0xFFFFFFFF
    s[d] = _rotl(s[d] ^ s[a], 8)
    s[c] = (s[c] + s[d]) & 0xFFFFFFFF
    s[b] = _rotl(s[b] ^ s[c], 7)


def chacha20_block(key: bytes, counter: int, nonce: bytes = bytes(12)) -> bytes:
    const = [0x61707865, 0x3320646E, 0x79622D32, 0x6B206574]
    state = const + list(struct.unpack("<8I", key)) + [counter] + list(struct.unpack("<3I", nonce))
    w = state[:]
    for _ in range(10):
        _qr(w, 0, 4, 8, 12)
        _qr(w, 1, 5, 9, 13)
        _qr(w, 2, 6, 10, 14)
        _qr(w, 3, 7, 11, 15)
        _qr(w, 0, 5, 10, 15)
        _qr(w, 1, 6, 11, 12)
        _qr(w, 2, 7, 8, 13)
        _qr(w, 3, 4, 9, 14)
    return struct.pack("<16I", *[(x + y) & 0xFFFFFFFF for x, y in zip(w, state)])


def chacha20_words(key: bytes, n: int) -> list[int]:
    """First ``n`` little-endian u64 words of the zero-nonce keystream."""
    out = []
    block = 0
    while len(out) < n:
        out.extend(struct.unpack("<8Q", chacha20_block(key, block)))
        block += 1
    return out[:n]


# --- fixed point with Python ints ---------------------------------------------

def to_signed(v: int) -> int:
    v %= MOD
    return v - MOD if v >= 1 << 63 else v


def encode_int(x: float, p: int) -> int:
    s = x * (1 << p)
    r = math.floor(abs(s) + 0.5)
    return (r if s >= 0 else -r) % MOD


def trunc_int(v: int, p: int) -> int:
    """Signed division by 2^p rounding half away from zero, as a ring element."""
    s = to_signed(v)
    q = (abs(s) + (1 << (p - 1))) >> p
    return (q if s >= 0 else -q) % MOD


def naive_shift(s0: int, s1: int, p: int) -> int:
    """Shift each share on its own (logical right shift), then add."""
    return ((s0 % MOD >> p) + (s1 % MOD >> p)) % MOD


def share_clip_int(s0: int, s1: int, bits: int = 64):
    """Force the first share into ``[-2^(bits-2), 2^(bits-2))`` keeping the sum."""
    mod, q = 1 << bits, 1 << (bits - 2)
    v = s0 % mod
    v = v - mod if v >= mod // 2 else v
    if v >= q:
        return (s0 - q) % mod, (s1 + q) % mod
    if v < -q:
        return (s0 + q) % mod, (s1 - q) % mod
    return s0 % mod, s1 % mod


def trunc_share_small(v: int, p: int, bits: int) -> int:
    """Half-away signed truncation in a ``bits``-bit ring."""
    mod = 1 << bits
    s = v % mod
    s = s - mod if s >= mod // 2 else s
    q = (abs(s) + (1 << (p - 1))) >> p
    return (q if s >= 0 else -q) % mod


# --- float references ----------------------------------------------------------

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def relu(x):
    return np.maximum(x, 0.0)


def dcor_v_squared(X, Y) -> float:
    """Squared distance correlation (V-statistic) by explicit loops over means."""
    X = np.asarray(X, float).reshape(len(X), -1)
    Y = np.asarray(Y, float).reshape(len(Y), -1)
    n = len(X)
    a = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(-1))
    b = np.sqrt(((Y[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
    A = a - a.mean(0, keepdims=True) - a.mean(1, keepdims=True) + a.mean()
    B = b - b.mean(0, keepdims=True) - b.mean(1, keepdims=True) + b.mean()
    vxy = (A * B).sum() / n**2
    vxx = (A * A).sum() / n**2
    vyy = (B * B).sum() / n**2
    return vxy / math.sqrt(vxx * vyy)
