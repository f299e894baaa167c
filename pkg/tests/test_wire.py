import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ssperm.runtime.wire import (
    CLIP_FLAG,
    HEADER_SIZE,
    ClipRecord,
    DecodeError,
    Message,
    MsgType,
    decode_clip_block,
    decode_message,
    decode_tensor,
    encode_clip_block,
    encode_message,
    encode_tensor,
)


def test_header_layout():
    frame = encode_message(Message(MsgType.OPEN_VALUE, 0xAABBCCDD, 7, b"xyz"))
    assert HEADER_SIZE == 26
    assert frame[:4] == b"SSRP" and frame[4] == 1 and frame[5] == 6
    assert frame[6:10] == bytes.fromhex("ddccbbaa")
    assert int.from_bytes(frame[10:18], "little") == 7
    assert int.from_bytes(frame[18:26], "little") == 3
    assert frame[26:] == b"xyz"


def test_tensor_layout():
    buf = encode_tensor(np.array([[1, 2, 3]], dtype=np.uint64))
    assert buf[0] == 2
    assert buf[1:17] == (1).to_bytes(8, "little") + (3).to_bytes(8, "little")
    assert len(buf) == 1 + 16 + 24


@given(hnp.arrays(np.uint64, hnp.array_shapes(min_dims=0, max_dims=3, max_side=5)))
def test_tensor_roundtrip(arr):
    out, end = decode_tensor(encode_tensor(arr))
    assert out.shape == arr.shape and np.array_equal(out, arr)
    assert end == len(encode_tensor(arr))


def test_clip_flag_and_roundtrip():
    rec = ClipRecord(9, np.array([1, 5], dtype=np.uint64), np.array([3], dtype=np.uint64))
    msg = Message(MsgType.TENSOR_SHARES, 1, 2, b"body", [rec])
    frame = encode_message(msg)
    assert frame[5] == int(MsgType.TENSOR_SHARES) | CLIP_FLAG
    back = decode_message(frame)
    assert back.msg_type is MsgType.TENSOR_SHARES and back.payload == b"body"
    assert back.clips[0].tensor_id == 9 and back.clips[0].overflow.tolist() == [1, 5]
    assert back.clips[0].underflow.tolist() == [3]


def test_clip_block_roundtrip_empty():
    recs, off = decode_clip_block(encode_clip_block([]))
    assert recs == [] and off == 8


@pytest.mark.parametrize(
    "mutate",
    [
        lambda f: b"XXXX" + f[4:],
        lambda f: f[:4] + b"\x02" + f[5:],
        lambda f: f[:5] + b"\x3f" + f[6:],
        lambda f: f[:-1],
        lambda f: f[:10],
    ],
)
def test_decode_rejects_malformed(mutate):
    frame = encode_message(Message(MsgType.OPEN_VALUE, 1, 2, encode_tensor(np.arange(3, dtype=np.uint64))))
    with pytest.raises(DecodeError):
        decode_message(mutate(frame))


def test_truncated_tensor():
    with pytest.raises(DecodeError):
        decode_tensor(encode_tensor(np.arange(4, dtype=np.uint64))[:-3])
