"""Fixed-point encoding and wrapping arithmetic on the ring Z_{2^64}.

Ring elements are stored as ``numpy.uint64``; every operation wraps modulo
2^64. The signed view is the two's-complement reinterpretation
(``int64``). Reals are encoded as ``round(x * 2^p)`` with ties rounded away
from zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np

RING_BITS = 64
DEFAULT_PRECISION = 23

_U64 = np.uint64
_SIGN_BIT = np.uint64(1 << 63)


class OutOfRange(ValueError):
    """A real value is outside the representable fixed-point range."""


@dataclass(frozen=True)
class FixedPointConfig:
    """Fixed-point layout: ``precision`` fractional bits inside 64-bit words."""

    precision: int = DEFAULT_PRECISION
    bits: ClassVar[int] = RING_BITS

    def __post_init__(self) -> None:
        if not 1 <= self.precision <= 40:
            raise ValueError(f"precision must be in [1, 40], got {self.precision}")

    @property
    def scale(self) -> int:
        return 1 << self.precision

    @property
    def ulp(self) -> float:
        return 2.0 ** -self.precision

    @property
    def value_bound(self) -> float:
        """Largest magnitude (exclusive) accepted by :func:`encode`."""
        return 2.0 ** (self.bits - 2 - self.precision)


DEFAULT_CONFIG = FixedPointConfig()


def _out(arr: np.ndarray):
    return arr[()] if arr.ndim == 0 else arr


def as_ring(x) -> np.ndarray:
    """Coerce Python ints (any sign) or integer arrays into ring elements."""
    if isinstance(x, (int, np.integer)):
        return np.asarray(int(x) % (1 << 64), dtype=_U64)
    arr = np.asarray(x)
    if arr.dtype == _U64:
        return arr
    if arr.dtype == object:
        return np.vectorize(lambda v: int(v) % (1 << 64), otypes=[_U64])(arr)
    if arr.dtype.kind in "iu":
        return arr.astype(np.int64).view(_U64)
    raise TypeError(f"cannot interpret dtype {arr.dtype} as ring elements")


def signed(r) -> np.ndarray:
    """Two's-complement signed view of ring elements."""
    return _out(np.asarray(r, dtype=_U64).view(np.int64))


def from_signed(s) -> np.ndarray:
    return _out(np.asarray(s, dtype=np.int64).view(_U64))


def _round_half_away(v: np.ndarray) -> np.ndarray:
    t = np.trunc(v)
    frac = v - t  # exact for doubles
    return t + np.where(np.abs(frac) >= 0.5, np.sign(v), 0.0)


def encode(x, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Encode reals as ring elements ``round(x * 2^p)`` (two's complement)."""
    v = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise OutOfRange("cannot encode non-finite values")
    if v.size and np.max(np.abs(v)) >= cfg.value_bound:
        raise OutOfRange(
            f"|x| = {np.max(np.abs(v)):.6g} exceeds fixed-point bound {cfg.value_bound:.6g}"
        )
    scaled = _round_half_away(v * float(cfg.scale))
    return _out(scaled.astype(np.int64).view(_U64))


def decode(r, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Interpret ring elements as signed fixed-point reals."""
    s = np.asarray(r, dtype=_U64).view(np.int64)
    return _out(s.astype(np.float64) / float(cfg.scale))


def ring_add(a, b):
    with np.errstate(over="ignore"):
        return _out(np.add(as_ring(a), as_ring(b), dtype=_U64))


def ring_sub(a, b):
    with np.errstate(over="ignore"):
        return _out(np.subtract(as_ring(a), as_ring(b), dtype=_U64))


def ring_neg(a):
    with np.errstate(over="ignore"):
        return _out(np.subtract(_U64(0), as_ring(a), dtype=_U64))


def ring_mul(a, b):
    with np.errstate(over="ignore"):
        return _out(np.multiply(as_ring(a), as_ring(b), dtype=_U64))


def ring_matmul(a, b):
    """Matrix product over Z_{2^64}; numpy integer matmul wraps silently."""
    with np.errstate(over="ignore"):
        return np.matmul(as_ring(a), as_ring(b))


def ring_sum(a, axis=None):
    with np.errstate(over="ignore"):
        return _out(np.sum(as_ring(a), axis=axis, dtype=_U64))


def truncate_plain(r, cfg: FixedPointConfig = DEFAULT_CONFIG):
    """Divide the signed value by 2^p, rounding half away from zero."""
    u = np.asarray(r, dtype=_U64)
    p = _U64(cfg.precision)
    half = _U64(1 << (cfg.precision - 1))
    with np.errstate(over="ignore"):
        neg = u >= _SIGN_BIT
        mag = np.where(neg, ~u + _U64(1), u)  # |signed|; 2^63 maps to itself
        q = (mag + half) >> p
        return _out(np.where(neg, ~q + _U64(1), q))
