"""A party engine: one role's view of a three-party session.

All three parties run the same program. Protocol functions branch on
``party.role``; P2 carries shape-only placeholder tensors so its control
flow and tensor numbering stay in lockstep with P0 and P1.
"""
from __future__ import annotations

import logging
import time
from collections import defaultdict
from contextlib import contextmanager

import numpy as np

from ..ring import FixedPointConfig, decode
from ..sharing import CommonPrg, PartyId, SharedTensor
from .accounting import Flight, TrafficAccounting
from .config import SessionConfig
from .transport import Transport
from .wire import (
    ClipRecord,
    Message,
    MsgType,
    decode_clip_block,
    decode_message,
    decode_tensors,
    encode_clip_block,
    encode_message,
    encode_tensors,
)

log = logging.getLogger(__name__)

P0, P1, P2 = PartyId.P0, PartyId.P1, PartyId.P2


class ProtocolError(RuntimeError):
    """Parties disagree about the protocol state (type, tensor id, session)."""


class Shadow:
    """Debug-only oracle that sees both shares of every materialised tensor.

    Lives outside the transport, so it never changes the transcript.
    """

    def __init__(self, cfg: FixedPointConfig, bound: float = 2.0**40, keep: bool = True):
        import threading

        self.cfg = cfg
        self.bound = bound
        self.keep = keep
        self.max_abs = 0.0
        self.violations: list[tuple[int, float]] = []
        self.values: dict[int, np.ndarray] = {}
        self._halves: dict[int, dict] = defaultdict(dict)
        self._lock = threading.Lock()

    def put(self, role: PartyId, tensor_id: int, data: np.ndarray) -> None:
        with self._lock:
            halves = self._halves[tensor_id]
            halves[role] = data
            if len(halves) < 2:
                return
            del self._halves[tensor_id]
        with np.errstate(over="ignore"):
            ring = halves[P0] + halves[P1]
        real = decode(ring, self.cfg)
        peak = float(np.max(np.abs(real))) if np.size(real) else 0.0
        with self._lock:
            self.max_abs = max(self.max_abs, peak)
            if peak >= self.bound:
                self.violations.append((tensor_id, peak))
            if self.keep:
                self.values[tensor_id] = ring


class Party:
    def __init__(
        self,
        role,
        config: SessionConfig,
        transport: Transport,
        accounting: TrafficAccounting | None = None,
        shadow: Shadow | None = None,
    ):
        self.role = PartyId.parse(role)
        self.config = config
        self.fp = FixedPointConfig(config.precision)
        self.session_id = config.session_id
        self.transport = transport
        self.accounting = accounting if accounting is not None else TrafficAccounting()
        self.shadow = shadow
        self.clip_mode = config.clip_mode
        self.prg01 = CommonPrg(config.pair_seed("p0p1"), (P0, P1)) if self.role in (P0, P1) else None
        self.prg12 = CommonPrg(config.pair_seed("p1p2"), (P1, P2)) if self.role in (P1, P2) else None
        self.private = CommonPrg(config.private_seed(self.role), (self.role,))
        self.outstanding: dict[int, ClipRecord] = {}
        self.clip_inbox: dict[int, ClipRecord] = {}
        self.timings: dict[str, float] = defaultdict(float)
        self.view_log: list[tuple[str, np.ndarray]] | None = None
        self._next_tid = 0
        self._op_seq = 0
        self._op_name = "setup"
        self._nesting = 0
        self._clock = 0

    def __repr__(self) -> str:
        return f"Party({self.role})"

    # -- bookkeeping -------------------------------------------------------

    @property
    def op_seq(self) -> int:
        """Number of top-level ops started so far."""
        return self._op_seq

    def new_tensor_id(self) -> int:
        self._next_tid += 1
        return self._next_tid

    @contextmanager
    def op(self, name: str):
        """Scope one protocol invocation; nested scopes join the outer one."""
        if self._nesting == 0:
            self._op_seq += 1
            self._op_name = name
            self._clock = 0
            start = time.perf_counter()
        self._nesting += 1
        try:
            yield
        finally:
            self._nesting -= 1
            if self._nesting == 0:
                self.timings[name] += time.perf_counter() - start

    def tensor(self, shape, data=None, *, thunk=None, pending=(), tid=None) -> SharedTensor:
        """Create this party's share object for a new tensor."""
        if tid is None:
            tid = self.new_tensor_id()
        if self.role == P2:
            return SharedTensor(shape, tid, P2, party=self)
        if self.role == P0:
            pending = frozenset(i for i in pending if i in self.outstanding)
        else:
            pending = frozenset(i for i in pending if i not in self.clip_inbox)
        if thunk is not None and not pending and self.role == P1:
            data, thunk = thunk(), None
        t = SharedTensor(shape, tid, self.role, data, party=self, thunk=thunk,
                         pending=pending if thunk is not None or self.role == P0 else ())
        if t._data is not None:
            self._on_materialize(t)
        return t

    def _on_materialize(self, t: SharedTensor) -> None:
        if self.shadow is not None:
            self.shadow.put(self.role, t.tensor_id, t._data)

    # -- messaging ---------------------------------------------------------

    def send(self, to, msg_type: MsgType, tensor_id: int, arrays=(), *, offline: bool = False,
             payload: bytes | None = None, elements: int | None = None) -> None:
        to = PartyId(to)
        clips: list[ClipRecord] = []
        if (
            self.role == P0
            and to == P1
            and self.outstanding
            and self.clip_mode == "piggyback"
            and msg_type != MsgType.CLIP_INDICES
        ):
            clips = list(self.outstanding.values())
            self.outstanding.clear()
        if payload is None:
            payload = encode_tensors(arrays)
            elements = sum(int(np.size(a)) for a in arrays)
        msg = Message(msg_type, self.session_id, tensor_id, payload, clips)
        frame = encode_message(msg)
        bits = 64 * (elements or 0)
        if msg_type == MsgType.CLIP_INDICES:
            clip_bits = bits  # the whole payload is indices
        else:
            clip_bits = 64 * sum(c.n_indices for c in clips)
            bits += clip_bits
        depth = 0 if offline else self._clock + 1
        self.accounting.record(
            Flight(
                src=int(self.role), dst=int(to), msg_type=msg_type.name, op=self._op_name,
                op_seq=self._op_seq, payload_bits=bits,
                clip_bits=clip_bits, raw_bytes=len(frame), depth=depth, offline=offline,
            ),
            frame,
        )
        self.transport.send(to, frame, depth)

    def recv(self, frm, msg_type: MsgType, tensor_id: int | None = None) -> list[np.ndarray]:
        frm = PartyId(frm)
        frame, depth = self.transport.recv(frm)
        self._clock = max(self._clock, depth)
        msg = decode_message(frame)
        if msg.session_id != self.session_id:
            raise ProtocolError(f"{self.role}: message from foreign session {msg.session_id:#x}")
        if msg.msg_type != msg_type:
            raise ProtocolError(
                f"{self.role}: expected {msg_type.name} from {frm}, got {msg.msg_type.name}"
            )
        if tensor_id is not None and msg.tensor_id != tensor_id:
            raise ProtocolError(
                f"{self.role}: tensor id mismatch from {frm}: expected {tensor_id}, got {msg.tensor_id}"
            )
        for rec in msg.clips:
            self.clip_inbox[rec.tensor_id] = rec
        if msg_type == MsgType.CLIP_INDICES:
            records, _ = decode_clip_block(msg.payload)
            for rec in records:
                self.clip_inbox[rec.tensor_id] = rec
            return []
        arrays = decode_tensors(msg.payload)
        if self.view_log is not None:
            for a in arrays:
                self.view_log.append((msg_type.name, a))
        return arrays

    # -- clip delivery -----------------------------------------------------

    def register_clip(self, record: ClipRecord) -> None:
        self.outstanding[record.tensor_id] = record

    def flush(self, *tensors: SharedTensor) -> None:
        """Make sure P1 holds the clip indices these tensors depend on.

        If an earlier P0->P1 message already carried them this is free;
        otherwise P0 sends a dedicated CLIP_INDICES flight.
        """
        ids = set().union(*(t.pending for t in tensors)) if tensors else set()
        if self.role == P0:
            if any(i in self.outstanding for i in ids):
                records = list(self.outstanding.values())
                self.outstanding.clear()
                n = sum(r.n_indices for r in records)
                self.send(P1, MsgType.CLIP_INDICES, 0, payload=encode_clip_block(records),
                          elements=n)
        elif self.role == P1:
            if any(i not in self.clip_inbox for i in ids):
                self.recv(P0, MsgType.CLIP_INDICES)
                missing = [i for i in ids if i not in self.clip_inbox]
                if missing:
                    raise ProtocolError(f"P1 still missing clip records {missing}")

    def needs_clips(self, *tensors: SharedTensor) -> bool:
        """On P1: whether any input still waits for clip indices."""
        return self.role == P1 and not all(t.ready for t in tensors)
