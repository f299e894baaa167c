"""Bit-exact message framing.

Frame layout (all integers little-endian)::

    magic      4 bytes   b"SSRP"
    version    u8        1
    msg_type   u8        MsgType code; bit 0x80 set => payload starts with a clip block
    session_id u32
    tensor_id  u64
    payload_len u64
    payload    payload_len bytes

A tensor inside a payload is ``u8 ndim, u64 dims[ndim], u64 elements``
(row-major). A clip block is ``u64 n_records`` followed by, per record,
``u64 tensor_id, u64 n_overflow, u64 n_underflow`` and the overflow then
underflow element indices as u64.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SSRP"
VERSION = 1
CLIP_FLAG = 0x80
HEADER = struct.Struct("<4sBBIQQ")
HEADER_SIZE = HEADER.size  # 26

_U64LE = np.dtype("<u8")


class MsgType(enum.IntEnum):
    TENSOR_SHARES = 1
    CLIP_INDICES = 2
    TRIPLE_SHARE = 3
    PERMUTED_SHARES = 4
    RESHARE_RESULT = 5
    OPEN_VALUE = 6
    CONTROL = 7


class DecodeError(ValueError):
    pass


@dataclass
class ClipRecord:
    """Clip adjustment P0 derived for one tensor."""

    tensor_id: int
    overflow: np.ndarray
    underflow: np.ndarray

    @property
    def n_indices(self) -> int:
        return int(self.overflow.size + self.underflow.size)


@dataclass
class Message:
    msg_type: MsgType
    session_id: int
    tensor_id: int
    payload: bytes = b""
    clips: list[ClipRecord] = field(default_factory=list)


def encode_tensor(arr: np.ndarray, dtype=_U64LE) -> bytes:
    arr = np.asarray(arr)  # tobytes() below is always C order; keeps 0-d shape
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    head = struct.pack(f"<B{arr.ndim}Q", arr.ndim, *arr.shape)
    return head + arr.astype(dtype, copy=False).tobytes()


def decode_tensor(buf, offset: int = 0, dtype=_U64LE) -> tuple[np.ndarray, int]:
    try:
        (ndim,) = struct.unpack_from("<B", buf, offset)
        dims = struct.unpack_from(f"<{ndim}Q", buf, offset + 1)
    except struct.error as e:
        raise DecodeError(f"truncated tensor header: {e}") from None
    offset += 1 + 8 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    nbytes = count * np.dtype(dtype).itemsize
    if offset + nbytes > len(buf):
        raise DecodeError("truncated tensor body")
    arr = np.frombuffer(buf, dtype=dtype, count=count, offset=offset)
    native = np.uint64 if np.dtype(dtype).kind == "u" else np.float64
    return arr.astype(native).reshape(dims), offset + nbytes


def encode_tensors(arrays) -> bytes:
    return b"".join(encode_tensor(a) for a in arrays)


def decode_tensors(buf, offset: int = 0) -> list[np.ndarray]:
    out = []
    while offset < len(buf):
        arr, offset = decode_tensor(buf, offset)
        out.append(arr)
    return out


def encode_clip_block(records) -> bytes:
    parts = [struct.pack("<Q", len(records))]
    for rec in records:
        parts.append(struct.pack("<QQQ", rec.tensor_id, rec.overflow.size, rec.underflow.size))
        parts.append(np.asarray(rec.overflow, dtype=_U64LE).tobytes())
        parts.append(np.asarray(rec.underflow, dtype=_U64LE).tobytes())
    return b"".join(parts)


def decode_clip_block(buf, offset: int = 0) -> tuple[list[ClipRecord], int]:
    try:
        (n,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
        records = []
        for _ in range(n):
            tid, n_over, n_under = struct.unpack_from("<QQQ", buf, offset)
            offset += 24
            if offset + 8 * (n_over + n_under) > len(buf):
                raise DecodeError("truncated clip block")
            over = np.frombuffer(buf, dtype=_U64LE, count=n_over, offset=offset).astype(np.uint64)
            offset += 8 * n_over
            under = np.frombuffer(buf, dtype=_U64LE, count=n_under, offset=offset).astype(np.uint64)
            offset += 8 * n_under
            records.append(ClipRecord(tid, over, under))
    except struct.error as e:
        raise DecodeError(f"truncated clip block: {e}") from None
    return records, offset


def encode_message(msg: Message) -> bytes:
    code = int(msg.msg_type)
    payload = msg.payload
    if msg.clips:
        code |= CLIP_FLAG
        payload = encode_clip_block(msg.clips) + payload
    head = HEADER.pack(MAGIC, VERSION, code, msg.session_id, msg.tensor_id, len(payload))
    return head + payload


def decode_message(frame: bytes) -> Message:
    if len(frame) < HEADER_SIZE:
        raise DecodeError("frame shorter than header")
    magic, version, code, session_id, tensor_id, plen = HEADER.unpack_from(frame, 0)
    if magic != MAGIC:
        raise DecodeError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DecodeError(f"unsupported version {version}")
    if len(frame) != HEADER_SIZE + plen:
        raise DecodeError(f"payload length {plen} does not match frame size {len(frame)}")
    try:
        msg_type = MsgType(code & ~CLIP_FLAG)
    except ValueError:
        raise DecodeError(f"unknown message type {code:#x}") from None
    payload = frame[HEADER_SIZE:]
    clips: list[ClipRecord] = []
    if code & CLIP_FLAG:
        clips, off = decode_clip_block(payload, 0)
        payload = payload[off:]
    return Message(msg_type, session_id, tensor_id, bytes(payload), clips)
