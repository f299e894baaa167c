"""Secure operations on shared tensors.

Every function here is called by all three parties with their own
:class:`SharedTensor` objects; each branches on ``party.role``. Outputs on P2
are shape-only placeholders.

Fixed-point bookkeeping: shares live at scale ``2^p``. Products of two
shares sit at ``2^2p`` until :func:`share_clip` + :func:`truncate_shared`
bring them back; that pair is fused into a single step inside
:func:`mul_shared`, :func:`matmul_shared` and real :func:`mul_public`.
"""
from __future__ import annotations

import enum
import logging

import numpy as np

from .ring import (
    decode,
    encode,
    from_signed,
    ring_add,
    ring_matmul,
    ring_mul,
    ring_neg,
    ring_sub,
    ring_sum,
    signed,
    truncate_plain,
)
from .runtime.party import Party
from .runtime.wire import ClipRecord, MsgType
from .sharing import (
    BeaverTriple,
    PartyId,
    SharedTensor,
    ShapeMismatch,
    dealer_gen_triple,
    gen_mask,
    gen_permutation,
    p1_triple_shares,
)

log = logging.getLogger(__name__)

P0, P1, P2 = PartyId.P0, PartyId.P1, PartyId.P2
_U64 = np.uint64
CLIP_BOUND = 1 << 62
_CLIP = _U64(CLIP_BOUND)


class FlipIncompatible(ValueError):
    """Random flipping requested for a function without the needed symmetry."""


class BadAxis(ValueError):
    pass


class ElementwiseFn(enum.Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    RELU_DERIV = "relu_deriv"

    @property
    def flip_compatible(self) -> bool:
        return self in (ElementwiseFn.SIGMOID, ElementwiseFn.TANH)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self is ElementwiseFn.RELU:
            return np.maximum(x, 0.0)
        if self is ElementwiseFn.SIGMOID:
            # split by sign to avoid exp overflow
            out = np.empty_like(x)
            pos = x >= 0
            out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
            e = np.exp(x[~pos])
            out[~pos] = e / (1.0 + e)
            return out
        if self is ElementwiseFn.TANH:
            return np.tanh(x)
        return (x > 0).astype(np.float64)

    @classmethod
    def parse(cls, name) -> "ElementwiseFn":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown activation {name!r}") from None


# ----------------------------------------------------------------------------
# helpers


def _party(*xs) -> Party:
    for x in xs:
        if isinstance(x, SharedTensor) and x.party is not None:
            return x.party
    raise ValueError("no shared tensor with an attached party among the operands")


def _check_same_shape(x: SharedTensor, y: SharedTensor) -> None:
    if x.shape != y.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {y.shape}")


def _pending(*xs: SharedTensor) -> frozenset:
    return frozenset().union(*(x.pending for x in xs))


def _local(party: Party, shape, fn, *inputs: SharedTensor, **kw) -> SharedTensor:
    """Apply a share-local function; defers on P1 while clip indices are in flight."""
    if party.role == P2:
        return party.tensor(shape, **kw)
    if all(x.ready for x in inputs):
        return party.tensor(shape, fn(*[x.data for x in inputs]), pending=_pending(*inputs), **kw)
    return party.tensor(
        shape, thunk=lambda: fn(*[x.data for x in inputs]), pending=_pending(*inputs), **kw
    )


def _encode_public(party: Party, c, shape) -> np.ndarray:
    return np.broadcast_to(np.asarray(encode(c, party.fp), dtype=_U64), shape)


def _is_integer_constant(c) -> bool:
    if isinstance(c, bool):
        return False
    if isinstance(c, (int, np.integer)):
        return True
    arr = np.asarray(c)
    return arr.dtype.kind in "iu"


# ----------------------------------------------------------------------------
# input and output


def share_input(party: Party, value, owner=P0, shape=None) -> SharedTensor:
    """Secret-share a real-valued tensor held by ``owner`` (P0 or P1).

    The owner picks ``r`` from its private stream; P0 ends up with ``r`` and
    P1 with ``x - r`` (a single owner->peer flight of the peer's share).
    Non-owners pass ``value=None`` and the ``shape``.
    """
    owner = PartyId.parse(owner)
    if owner == P2:
        raise ValueError("inputs are owned by P0 or P1")
    if shape is None:
        if value is None:
            raise ValueError("shape is required when the value is not held locally")
        shape = np.shape(value)
    shape = tuple(int(s) for s in shape)
    peer = P1 if owner == P0 else P0
    with party.op("share_input"):
        tid = party.new_tensor_id()
        if party.role == owner:
            x = np.asarray(encode(np.asarray(value, dtype=np.float64), party.fp), dtype=_U64)
            if x.shape != shape:
                raise ShapeMismatch(f"value shape {x.shape} does not match declared {shape}")
            r = party.private.ring(shape)
            s1 = np.asarray(ring_sub(x, r), dtype=_U64)
            mine, theirs = (r, s1) if owner == P0 else (s1, r)
            party.send(peer, MsgType.TENSOR_SHARES, tid, [theirs])
            return party.tensor(shape, mine, tid=tid)
        if party.role == peer:
            (data,) = party.recv(owner, MsgType.TENSOR_SHARES, tid)
            return party.tensor(shape, data, tid=tid)
        return party.tensor(shape, tid=tid)


def share_public(party: Party, value) -> SharedTensor:
    """A sharing of a public constant: P0 holds the encoding, P1 holds zeros."""
    enc = np.asarray(encode(np.asarray(value, dtype=np.float64), party.fp), dtype=_U64)
    shape = enc.shape
    if party.role == P0:
        return party.tensor(shape, enc)
    if party.role == P1:
        return party.tensor(shape, np.zeros(shape, dtype=_U64))
    return party.tensor(shape)


def reveal(x: SharedTensor, to=None):
    """Open ``x``. ``to=None`` opens mutually to P0 and P1.

    Returns the ring tensor on the receiving parties and ``None`` elsewhere.
    """
    party = _party(x)
    recipients = {P0, P1} if to is None else {PartyId.parse(to)}
    with party.op("reveal"):
        return _open(party, x, recipients)


def reveal_float(x: SharedTensor, to=None):
    out = reveal(x, to)
    return None if out is None else np.asarray(decode(out, x.party.fp), dtype=np.float64)


def _open(party: Party, x: SharedTensor, recipients: set):
    role = party.role
    tid = x.tensor_id
    if recipients == {P0, P1}:
        if role == P0:
            party.send(P1, MsgType.OPEN_VALUE, tid, [x.data])
            (other,) = party.recv(P1, MsgType.OPEN_VALUE, tid)
            return np.asarray(ring_add(x.data, other), dtype=_U64)
        if role == P1:
            return _mutual_p1(party, tid, [x], lambda d: [d[0]])[0]
        return None
    if recipients == {P2}:
        party.flush(x)
        if role in (P0, P1):
            party.send(P2, MsgType.OPEN_VALUE, tid, [x.data])
            return None
        (a,) = party.recv(P0, MsgType.OPEN_VALUE, tid)
        (b,) = party.recv(P1, MsgType.OPEN_VALUE, tid)
        return np.asarray(ring_add(a, b), dtype=_U64)
    if recipients == {P1}:
        if role == P0:
            party.send(P1, MsgType.OPEN_VALUE, tid, [x.data])
        elif role == P1:
            (other,) = party.recv(P0, MsgType.OPEN_VALUE, tid)
            return np.asarray(ring_add(x.data, other), dtype=_U64)
        return None
    if recipients == {P0}:
        party.flush(x)
        if role == P1:
            party.send(P0, MsgType.OPEN_VALUE, tid, [x.data])
        elif role == P0:
            (other,) = party.recv(P1, MsgType.OPEN_VALUE, tid)
            return np.asarray(ring_add(x.data, other), dtype=_U64)
        return None
    raise ValueError(f"unsupported recipients {recipients}")


def _mutual_p1(party: Party, tid: int, inputs, masked):
    """P1's half of a mutual opening: P1 sends ``masked(data)`` and adds P0's.

    When P1's inputs still wait for clip indices it receives first; P0's
    message carries the indices, so no extra flight is needed.
    """
    if all(x.ready for x in inputs):
        mine = masked([x.data for x in inputs])
        party.send(P0, MsgType.OPEN_VALUE, tid, mine)
        theirs = party.recv(P0, MsgType.OPEN_VALUE, tid)
    else:
        theirs = party.recv(P0, MsgType.OPEN_VALUE, tid)
        mine = masked([x.data for x in inputs])
        party.send(P0, MsgType.OPEN_VALUE, tid, mine)
    return [np.asarray(ring_add(a, b), dtype=_U64) for a, b in zip(mine, theirs)]


# ----------------------------------------------------------------------------
# linear, local operations


def add_shared(x: SharedTensor, y: SharedTensor) -> SharedTensor:
    _check_same_shape(x, y)
    party = _party(x, y)
    with party.op("add"):
        return _local(party, x.shape, lambda a, b: np.asarray(ring_add(a, b), dtype=_U64), x, y)


def sub_shared(x: SharedTensor, y: SharedTensor) -> SharedTensor:
    _check_same_shape(x, y)
    party = _party(x, y)
    with party.op("sub"):
        return _local(party, x.shape, lambda a, b: np.asarray(ring_sub(a, b), dtype=_U64), x, y)


def neg(x: SharedTensor) -> SharedTensor:
    party = _party(x)
    with party.op("neg"):
        return _local(party, x.shape, lambda a: np.asarray(ring_neg(a), dtype=_U64), x)


def add_bias(x: SharedTensor, b: SharedTensor) -> SharedTensor:
    """Add a shared row vector ``b`` (shape ``(H,)``) to every row of ``x``."""
    if x.ndim != 2 or b.shape != (x.shape[1],):
        raise ShapeMismatch(f"bias of shape {b.shape} does not fit {x.shape}")
    party = _party(x, b)
    with party.op("add"):
        return _local(party, x.shape, lambda a, c: np.asarray(ring_add(a, c[None, :]), dtype=_U64), x, b)


def add_public(x: SharedTensor, c) -> SharedTensor:
    """``x + c`` for a public real ``c``: only P0 adds ``encode(c)``."""
    party = _party(x)
    with party.op("add_public"):
        if party.role == P0:
            enc = _encode_public(party, c, x.shape)
            return party.tensor(x.shape, np.asarray(ring_add(x.data, enc), dtype=_U64),
                                pending=x.pending)
        return _local(party, x.shape, lambda a: a, x)


def sub_from_public(c, x: SharedTensor) -> SharedTensor:
    """``c - x`` for a public real ``c``."""
    party = _party(x)
    with party.op("sub_from_public"):
        if party.role == P0:
            enc = _encode_public(party, c, x.shape)
            return party.tensor(x.shape, np.asarray(ring_sub(enc, x.data), dtype=_U64),
                                pending=x.pending)
        return _local(party, x.shape, lambda a: np.asarray(ring_neg(a), dtype=_U64), x)


def mul_public(x: SharedTensor, c) -> SharedTensor:
    """Multiply by a public constant.

    Integer constants (Python/numpy ints) scale the raw shares exactly.
    Real constants are encoded, multiplied in and then clipped and
    truncated, which costs one ulp of error and possibly clip indices.
    """
    party = _party(x)
    with party.op("mul_public"):
        if _is_integer_constant(c):
            k = np.broadcast_to(from_signed(np.asarray(c, dtype=np.int64)), x.shape)
            return _local(party, x.shape, lambda a: np.asarray(ring_mul(a, k), dtype=_U64), x)
        enc = _encode_public(party, c, x.shape)
        return _clip_truncate_local(
            party, x.shape, lambda a: np.asarray(ring_mul(a, enc), dtype=_U64), x
        )


def transpose_local(x: SharedTensor) -> SharedTensor:
    party = _party(x)
    if x.ndim != 2:
        raise ShapeMismatch(f"transpose needs a matrix, got shape {x.shape}")
    with party.op("transpose"):
        return _local(party, x.shape[::-1], lambda a: np.ascontiguousarray(a.T), x)


def sum_axis(x: SharedTensor, axis: int) -> SharedTensor:
    party = _party(x)
    if not isinstance(axis, (int, np.integer)) or not -x.ndim <= axis < x.ndim:
        raise BadAxis(f"axis {axis!r} is invalid for shape {x.shape}")
    axis = int(axis) % x.ndim
    shape = x.shape[:axis] + x.shape[axis + 1 :]
    with party.op("sum"):
        return _local(party, shape, lambda a: np.asarray(ring_sum(a, axis=axis), dtype=_U64).reshape(shape), x)


def reshape(x: SharedTensor, shape) -> SharedTensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != x.size:
        raise ShapeMismatch(f"cannot reshape {x.shape} to {shape}")
    party = _party(x)
    with party.op("reshape"):
        return _local(party, shape, lambda a: a.reshape(shape), x)


def take_rows(x: SharedTensor, rows) -> SharedTensor:
    """Select rows (first-axis entries) by index array or slice."""
    idx = np.arange(x.shape[0])[rows]
    idx = np.atleast_1d(idx)
    shape = (idx.size,) + x.shape[1:]
    party = _party(x)
    with party.op("take_rows"):
        return _local(party, shape, lambda a: a[idx], x)


# ----------------------------------------------------------------------------
# ShareClip and truncation


def clip_share(s0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """P0's side of ShareClip on its own share.

    Returns ``(clipped, overflow_idx, underflow_idx)`` with flat row-major
    indices. Elements with signed value ``>= 2^62`` move down by ``2^62``;
    those below ``-2^62`` move up, so the result lies in ``[-2^62, 2^62)``.
    """
    s0 = np.asarray(s0, dtype=_U64)
    sv = np.asarray(signed(s0)).ravel()
    over = np.flatnonzero(sv >= CLIP_BOUND).astype(_U64)
    under = np.flatnonzero(sv < -CLIP_BOUND).astype(_U64)
    out = s0.ravel().copy()
    with np.errstate(over="ignore"):
        out[over.astype(np.int64)] -= _CLIP
        out[under.astype(np.int64)] += _CLIP
    return out.reshape(s0.shape), over, under


def clip_peer_share(s1, overflow, underflow) -> np.ndarray:
    """P1's compensation for P0's clip, keeping the sum unchanged."""
    s1 = np.asarray(s1, dtype=_U64)
    out = s1.ravel().copy()
    with np.errstate(over="ignore"):
        out[np.asarray(overflow, dtype=np.int64)] += _CLIP
        out[np.asarray(underflow, dtype=np.int64)] -= _CLIP
    return out.reshape(s1.shape)


def _clip_truncate_local(party: Party, shape, fn, *inputs: SharedTensor, truncate: bool = True):
    """Compute ``fn`` on shares, clip P0's result and (optionally) truncate.

    P0 registers the clip record for delivery with its next message to P1;
    P1's result stays deferred until that record arrives.
    """
    tid = party.new_tensor_id()
    trunc = (lambda a: np.asarray(truncate_plain(a, party.fp), dtype=_U64)) if truncate else (lambda a: a)
    if party.role == P2:
        out = party.tensor(shape, tid=tid)
    elif party.role == P0:
        raw = fn(*[x.data for x in inputs])
        clipped, over, under = clip_share(raw)
        party.register_clip(ClipRecord(tid, over, under))
        out = party.tensor(shape, trunc(clipped), pending=_pending(*inputs) | {tid}, tid=tid)
    else:
        def thunk():
            rec = party.clip_inbox[tid]
            raw = fn(*[x.data for x in inputs])
            return trunc(clip_peer_share(raw, rec.overflow, rec.underflow))

        out = party.tensor(shape, thunk=thunk, pending=_pending(*inputs) | {tid}, tid=tid)
    if party.clip_mode == "eager":
        party.flush(out)
    return out


def share_clip(x: SharedTensor) -> SharedTensor:
    """Bound P0's share to ``[-2^62, 2^62)`` without changing the value."""
    party = _party(x)
    with party.op("share_clip"):
        return _clip_truncate_local(party, x.shape, lambda a: a, x, truncate=False)


def truncate_shared(x: SharedTensor) -> SharedTensor:
    """Each party rounds its own share divided by ``2^p``.

    Within one ulp of :func:`truncate_plain` provided P0's share was clipped
    and the value lies in ``[-2^62, 2^62)``.
    """
    party = _party(x)
    with party.op("truncate"):
        return _local(party, x.shape, lambda a: np.asarray(truncate_plain(a, party.fp), dtype=_U64), x)


# ----------------------------------------------------------------------------
# Beaver multiplication


def _beaver(party: Party, x: SharedTensor, y: SharedTensor, kind: str, out_shape):
    role = party.role
    triple_tid = party.new_tensor_id()
    # offline: P2 deals; P1's shares come from the common (P1, P2) stream
    if role == P2:
        _, s0 = dealer_gen_triple(party.private, party.prg12, x.shape, y.shape, kind)
        party.send(P0, MsgType.TRIPLE_SHARE, triple_tid, [s0.u, s0.v, s0.w], offline=True)
        return _clip_truncate_local(party, out_shape, None)
    if role == P1:
        t = p1_triple_shares(party.prg12, x.shape, y.shape, kind)
    else:
        t = BeaverTriple(*party.recv(P2, MsgType.TRIPLE_SHARE, triple_tid))

    # online: open e = x - u and f = y - v both ways in one round
    def masked(d):
        return [np.asarray(ring_sub(d[0], t.u), dtype=_U64), np.asarray(ring_sub(d[1], t.v), dtype=_U64)]

    if role == P0:
        mine = masked([x.data, y.data])
        party.send(P1, MsgType.OPEN_VALUE, x.tensor_id, mine)
        theirs = party.recv(P1, MsgType.OPEN_VALUE, x.tensor_id)
        e, f = [np.asarray(ring_add(a, b), dtype=_U64) for a, b in zip(mine, theirs)]
    else:
        e, f = _mutual_p1(party, x.tensor_id, [x, y], masked)

    prod = ring_mul if kind == "elementwise" else ring_matmul

    def combine():
        z = ring_add(ring_add(prod(e, t.v), prod(t.u, f)), t.w)
        if role == P0:
            z = ring_add(z, prod(e, f))
        return np.asarray(z, dtype=_U64)

    # inputs are consumed already, so the result only waits for its own clip
    return _clip_truncate_local(party, out_shape, combine)


def mul_shared(x: SharedTensor, y: SharedTensor) -> SharedTensor:
    """Elementwise product via a Beaver triple, then ShareClip and truncation."""
    _check_same_shape(x, y)
    party = _party(x, y)
    with party.op("mul"):
        return _beaver(party, x, y, "elementwise", x.shape)


def matmul_shared(x: SharedTensor, w: SharedTensor) -> SharedTensor:
    """Matrix product with a matrix triple; one truncation per output element."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"cannot multiply {x.shape} by {w.shape}")
    party = _party(x, w)
    with party.op("matmul"):
        return _beaver(party, x, w, "matmul", (x.shape[0], w.shape[1]))


# ----------------------------------------------------------------------------
# compute-after-permutation


def cap(z: SharedTensor, fn, flipping: bool = False) -> SharedTensor:
    """Evaluate an elementwise function through P2 on permuted shares.

    P0 and P1 draw a sign mask (only when flipping) and then a permutation
    from their common stream, send their permuted shares to P2, and P2
    returns a fresh sharing of ``f`` of what it saw: P1's share is drawn
    from the (P1, P2) stream, only P0's is sent. The permutation and flips
    are then undone locally.
    """
    fn = ElementwiseFn.parse(fn)
    if flipping and not fn.flip_compatible:
        raise FlipIncompatible(f"random flipping is not defined for {fn.value}")
    party = _party(z)
    role = party.role
    n = z.size
    with party.op("cap"):
        mask = perm = None
        if role in (P0, P1):
            if flipping:
                mask = gen_mask(party.prg01, n)
            perm = gen_permutation(party.prg01, n)
        party.flush(z)
        tid = z.tensor_id
        if role == P2:
            (a,) = party.recv(P0, MsgType.PERMUTED_SHARES, tid)
            (b,) = party.recv(P1, MsgType.PERMUTED_SHARES, tid)
            seen = np.asarray(ring_add(a, b), dtype=_U64)
            y = np.asarray(encode(fn(decode(seen, party.fp)), party.fp), dtype=_U64)
            r = party.prg12.ring((n,))
            party.send(P0, MsgType.RESHARE_RESULT, tid, [np.asarray(ring_sub(y, r), dtype=_U64)])
            return party.tensor(z.shape)

        s = z.data.ravel()
        if flipping:
            s = np.where(mask, np.asarray(ring_neg(s), dtype=_U64), s)
        party.send(P2, MsgType.PERMUTED_SHARES, tid, [s[perm]])
        if role == P1:
            yp = party.prg12.ring((n,))
        else:
            (yp,) = party.recv(P2, MsgType.RESHARE_RESULT, tid)
        y = np.empty(n, dtype=_U64)
        y[perm] = yp
        if flipping:
            if fn is ElementwiseFn.SIGMOID:
                # sigmoid(-x) = 1 - sigmoid(x)
                flipped = np.asarray(ring_neg(y), dtype=_U64)
                if role == P0:
                    flipped = np.asarray(ring_add(flipped, encode(1.0, party.fp)), dtype=_U64)
            else:
                flipped = np.asarray(ring_neg(y), dtype=_U64)
            y = np.where(mask, flipped, y)
        return party.tensor(z.shape, y.reshape(z.shape))
