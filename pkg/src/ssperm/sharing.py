"""Additive shares, common PRGs, permutations/masks and Beaver triples.

A value ``x`` is split as ``<x>_0 = r`` and ``<x>_1 = x - r`` over Z_{2^64}.
Party pairs that need correlated randomness hold a :class:`CommonPrg`: a
ChaCha20 keystream (RFC 7539 block function, 32-byte key, zero nonce) read
as little-endian 64-bit words. Word ``k`` of the stream is bytes
``8k .. 8k+7`` of the keystream, so two endpoints holding the same seed and
counter produce identical words.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from .ring import as_ring, ring_add, ring_matmul, ring_mul, ring_sub

_U64 = np.uint64
_WORDS_PER_BLOCK = 8
_REFILL_WORDS = 4096


class PartyId(enum.IntEnum):
    P0 = 0
    P1 = 1
    P2 = 2

    @classmethod
    def parse(cls, value) -> "PartyId":
        if isinstance(value, PartyId):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown role {value!r}") from None
        return cls(int(value))

    def __str__(self) -> str:
        return self.name


class ShapeMismatch(ValueError):
    pass


class IdMismatch(ValueError):
    pass


class PendingClip(RuntimeError):
    """A share is waiting for clip indices that have not arrived yet."""


class PhantomShare(RuntimeError):
    """The helper party P2 holds no share of this tensor."""


class CommonPrg:
    """Deterministic keyed stream of unsigned 64-bit words.

    ``pair`` names the parties holding the seed; ``counter`` is the index of
    the next word to be produced.
    """

    def __init__(self, seed: bytes, pair: tuple = (), counter: int = 0):
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        self.seed = bytes(seed)
        self.pair = tuple(pair)
        self.counter = counter
        self._buf = np.empty(0, dtype=_U64)
        self._buf_start = 0

    def __repr__(self) -> str:
        return f"CommonPrg(pair={self.pair}, counter={self.counter})"

    def _keystream_words(self, first_block: int, n_blocks: int) -> np.ndarray:
        if first_block + n_blocks >= 1 << 32:
            raise OverflowError("ChaCha20 block counter exhausted")
        nonce = struct.pack("<I", first_block) + bytes(12)
        enc = Cipher(algorithms.ChaCha20(self.seed, nonce), mode=None).encryptor()
        raw = enc.update(bytes(64 * n_blocks))
        return np.frombuffer(raw, dtype="<u8").astype(_U64)

    def next_u64s(self, n: int) -> np.ndarray:
        """Return the next ``n`` words and advance the counter by ``n``."""
        if n < 0:
            raise ValueError("n must be non-negative")
        start = self.counter
        end = start + n
        buf_end = self._buf_start + self._buf.size
        if not (self._buf_start <= start and end <= buf_end):
            first_block = start // _WORDS_PER_BLOCK
            need = end - first_block * _WORDS_PER_BLOCK
            n_blocks = -(-max(need, _REFILL_WORDS) // _WORDS_PER_BLOCK)
            self._buf = self._keystream_words(first_block, n_blocks)
            self._buf_start = first_block * _WORDS_PER_BLOCK
        self.counter = end
        off = start - self._buf_start
        return self._buf[off : off + n].copy()

    def seek(self, counter: int) -> None:
        self.counter = counter

    def ring(self, shape) -> np.ndarray:
        """Uniform ring tensor of the given shape."""
        shape = tuple(shape)
        return self.next_u64s(int(np.prod(shape, dtype=np.int64))).reshape(shape)


def prg_next_u64s(prg: CommonPrg, n: int) -> np.ndarray:
    return prg.next_u64s(n)


def _accept(words: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    # 2^64 mod bound; a word is unbiased iff it lies below 2^64 - rem
    with np.errstate(over="ignore"):
        rem = (_U64(0) - bounds) % bounds
        limit = _U64(0) - rem
    return (rem == 0) | (words < limit)


def uniform_below(prg: CommonPrg, bounds: Iterable[int]) -> np.ndarray:
    """Draw one unbiased index in ``[0, b)`` per bound, by rejection sampling.

    Semantics are sequential: for each bound in order, words are consumed
    until one is accepted. The bulk path below reproduces that exactly.
    """
    bounds = np.asarray(list(bounds) if not isinstance(bounds, np.ndarray) else bounds, dtype=_U64)
    out = np.empty(bounds.size, dtype=np.int64)
    pos = 0
    while pos < bounds.size:
        start = prg.counter
        words = prg.next_u64s(bounds.size - pos)
        b = bounds[pos:]
        ok = _accept(words, b)
        if ok.all():
            out[pos:] = (words % b).astype(np.int64)
            return out
        k = int(np.argmin(ok))
        out[pos : pos + k] = (words[:k] % b[:k]).astype(np.int64)
        # rewind to just after the rejected word and retry from there
        prg.seek(start + k + 1)
        bk = int(b[k])
        while True:
            w = prg.next_u64s(1)
            if _accept(w, np.asarray([bk], dtype=_U64))[0]:
                out[pos + k] = int(w[0] % _U64(bk))
                break
        pos += k + 1
    return out


def gen_permutation(prg: CommonPrg, n: int) -> np.ndarray:
    """Durstenfeld shuffle of ``range(n)`` driven by ``prg``.

    For ``i = n-1 .. 1`` an index ``j`` uniform in ``[0, i]`` is drawn and
    positions ``i`` and ``j`` are swapped. Applying the result as
    ``z[perm]`` permutes a vector.
    """
    if n < 1:
        raise ValueError("permutation length must be >= 1")
    perm = list(range(n))
    if n == 1:
        return np.asarray(perm, dtype=np.int64)
    js = uniform_below(prg, np.arange(n, 1, -1, dtype=_U64)).tolist()
    for i, j in zip(range(n - 1, 0, -1), js):
        perm[i], perm[j] = perm[j], perm[i]
    return np.asarray(perm, dtype=np.int64)


def invert_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size, dtype=perm.dtype)
    return inv


def gen_mask(prg: CommonPrg, n: int) -> np.ndarray:
    """``n`` unbiased bits, taken LSB-first from ``ceil(n/64)`` words."""
    if n == 0:
        return np.zeros(0, dtype=bool)
    words = prg.next_u64s(-(-n // 64)).astype("<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")
    return bits[:n].astype(bool)


# ----------------------------------------------------------------------------
# shares


def share_plain(x, r) -> tuple[np.ndarray, np.ndarray]:
    """Split ring tensor ``x`` with mask ``r``: returns ``(r, x - r)``."""
    x = as_ring(x)
    r = as_ring(r)
    if r.shape != x.shape:
        r = np.broadcast_to(r, x.shape).copy()
    return r.copy(), np.asarray(ring_sub(x, r), dtype=_U64)


def share_random(x, prg: CommonPrg) -> tuple[np.ndarray, np.ndarray]:
    x = as_ring(x)
    return share_plain(x, prg.ring(x.shape))


class SharedTensor:
    """One party's additive share of a tensor.

    On P0/P1 ``data`` holds the share. P1's share can be *pending*: it was
    produced by a clip whose indices P0 has not delivered yet, and ``data``
    is then computed on first access from ``_thunk``. On P2 the tensor is a
    shape-only placeholder so that all three parties walk the same program.
    """

    __slots__ = ("party", "shape", "owner", "tensor_id", "_data", "_thunk", "pending")

    def __init__(
        self,
        shape,
        tensor_id: int,
        owner: PartyId,
        data: np.ndarray | None = None,
        *,
        party=None,
        thunk: Callable[[], np.ndarray] | None = None,
        pending: frozenset = frozenset(),
    ):
        self.shape = tuple(int(s) for s in shape)
        self.tensor_id = int(tensor_id)
        self.owner = PartyId(owner)
        self.party = party
        self._data = None if data is None else np.asarray(data, dtype=_U64).reshape(self.shape)
        self._thunk = thunk
        self.pending = frozenset(pending)

    def __repr__(self) -> str:
        state = "phantom" if self.is_phantom else ("pending" if self._data is None else "ready")
        return f"SharedTensor(id={self.tensor_id}, shape={self.shape}, owner={self.owner}, {state})"

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def is_phantom(self) -> bool:
        return self._data is None and self._thunk is None

    @property
    def ready(self) -> bool:
        if self._data is not None:
            return True
        if self._thunk is None:
            return False
        inbox = self.party.clip_inbox if self.party is not None else {}
        return all(i in inbox for i in self.pending)

    @property
    def data(self) -> np.ndarray:
        if self._data is None:
            if self._thunk is None:
                raise PhantomShare(f"{self.owner} holds no share of tensor {self.tensor_id}")
            if not self.ready:
                raise PendingClip(
                    f"tensor {self.tensor_id} awaits clip indices {sorted(self.pending)}"
                )
            self._data = np.asarray(self._thunk(), dtype=_U64).reshape(self.shape)
            self._thunk = None
            self.pending = frozenset()
            if self.party is not None:
                self.party._on_materialize(self)
        return self._data

    # operator sugar; the protocol functions do the work
    def __add__(self, other):
        from . import protocols

        if isinstance(other, SharedTensor):
            return protocols.add_shared(self, other)
        return protocols.add_public(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import protocols

        if isinstance(other, SharedTensor):
            return protocols.sub_shared(self, other)
        return protocols.add_public(self, -np.asarray(other, dtype=np.float64))

    def __rsub__(self, other):
        from . import protocols

        return protocols.sub_from_public(other, self)

    def __neg__(self):
        from . import protocols

        return protocols.neg(self)

    def __mul__(self, other):
        from . import protocols

        if isinstance(other, SharedTensor):
            return protocols.mul_shared(self, other)
        return protocols.mul_public(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from . import protocols

        return protocols.matmul_shared(self, other)

    @property
    def T(self):
        from . import protocols

        return protocols.transpose_local(self)

    def __getitem__(self, rows):
        from . import protocols

        return protocols.take_rows(self, rows)


def reconstruct(a: SharedTensor, b: SharedTensor) -> np.ndarray:
    """Sum P0's and P1's shares of the same tensor."""
    if {a.owner, b.owner} != {PartyId.P0, PartyId.P1}:
        raise ValueError("reconstruct needs one share from P0 and one from P1")
    if a.tensor_id != b.tensor_id:
        raise IdMismatch(f"tensor ids differ: {a.tensor_id} vs {b.tensor_id}")
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    for t in (a, b):
        if not t.ready:
            raise PendingClip(f"tensor {t.tensor_id} has unflushed clip indices")
    return np.asarray(ring_add(a.data, b.data), dtype=_U64)


# ----------------------------------------------------------------------------
# Beaver triples


@dataclass
class BeaverTriple:
    """Ring tensors ``u``, ``v`` and ``w = u*v`` (elementwise) or ``u@v``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


def _triple_shapes(shape_x, shape_y, kind: str):
    shape_x, shape_y = tuple(shape_x), tuple(shape_y)
    if kind == "elementwise":
        if shape_x != shape_y:
            raise ShapeMismatch(f"elementwise triple needs equal shapes, got {shape_x}, {shape_y}")
        return shape_x, shape_y, shape_x
    if kind == "matmul":
        if len(shape_x) != 2 or len(shape_y) != 2 or shape_x[1] != shape_y[0]:
            raise ShapeMismatch(f"matmul triple shapes incompatible: {shape_x}, {shape_y}")
        return shape_x, shape_y, (shape_x[0], shape_y[1])
    raise ValueError(f"unknown triple kind {kind!r}")


def triple_from_values(u, v, kind: str) -> BeaverTriple:
    u, v = as_ring(u), as_ring(v)
    _triple_shapes(u.shape, v.shape, kind)
    w = ring_mul(u, v) if kind == "elementwise" else ring_matmul(u, v)
    return BeaverTriple(u, v, np.asarray(w, dtype=_U64))


def p1_triple_shares(prg12: CommonPrg, shape_x, shape_y, kind: str) -> BeaverTriple:
    """P1's triple shares, drawn from the (P1, P2) stream in the order u, v, w."""
    su, sv, sw = _triple_shapes(shape_x, shape_y, kind)
    return BeaverTriple(prg12.ring(su), prg12.ring(sv), prg12.ring(sw))


def dealer_gen_triple(
    private: CommonPrg, prg12: CommonPrg, shape_x, shape_y, kind: str, *, values=None
) -> tuple[BeaverTriple, BeaverTriple]:
    """Run on P2: build a fresh triple and split it.

    Returns ``(triple, p0_shares)``. P1's shares come from ``prg12`` (so P1
    can regenerate them and nothing is sent to it); P0's are the remainder
    and are the only thing that leaves P2.
    """
    su, sv, _ = _triple_shapes(shape_x, shape_y, kind)
    if values is None:
        u, v = private.ring(su), private.ring(sv)
    else:
        u, v = values
    triple = triple_from_values(u, v, kind)
    s1 = p1_triple_shares(prg12, su, sv, kind)
    s0 = BeaverTriple(
        np.asarray(ring_sub(triple.u, s1.u)),
        np.asarray(ring_sub(triple.v, s1.v)),
        np.asarray(ring_sub(triple.w, s1.w)),
    )
    return triple, s0
