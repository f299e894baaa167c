"""Traffic and round accounting.

``payload_bits`` counts 64 bits per tensor element and per clip index;
headers, shapes and record counts only show up in ``raw_bytes``. That is the
unit the NL-style cost formulas are written in.

Rounds of a protocol invocation are the length of its longest chain of
causally dependent online flights. Every sender stamps a flight with
``1 + (deepest flight it has received within the same invocation)``;
offline flights (triple dealing) are stamped 0 and do not extend chains.
"""
from __future__ import annotations

import math
import threading
from collections import defaultdict
from dataclasses import asdict, dataclass

from ..sharing import PartyId

LINKS = [(s, d) for s in PartyId for d in PartyId if s != d]

# ReLU cost per element, for report rendering only.
REFERENCE_RELU_COSTS = [
    {"protocol": "Ours", "rounds": "3", "bits": "3L"},
    {"protocol": "SecureNN", "rounds": "11", "bits": "8L log p + 32L + 2"},
    {"protocol": "ABY3", "rounds": "6 + log L", "bits": "105L"},
    {"protocol": "Trident", "rounds": "7", "bits": "16L + 64"},
    {"protocol": "GC", "rounds": "4", "bits": "k(3L - 1)"},
]


def reference_relu_bits(protocol: str, L: int = 64, p: int = 67, k: int = 128) -> float:
    """Evaluate the per-element bit formula of a reference protocol."""
    formulas = {
        "Ours": lambda: 3 * L,
        "SecureNN": lambda: 8 * L * math.log2(p) + 32 * L + 2,
        "ABY3": lambda: 105 * L,
        "Trident": lambda: 16 * L + 64,
        "GC": lambda: k * (3 * L - 1),
    }
    return float(formulas[protocol]())


def link_name(src, dst) -> str:
    return f"{PartyId(src).name}->{PartyId(dst).name}"


@dataclass(frozen=True)
class Flight:
    src: int
    dst: int
    msg_type: str
    op: str
    op_seq: int
    payload_bits: int
    clip_bits: int
    raw_bytes: int
    depth: int
    offline: bool


class TrafficAccounting:
    """Thread-safe log of every flight sent in a session."""

    def __init__(self, capture: bool = False):
        self._lock = threading.Lock()
        self.flights: list[Flight] = []
        self.capture = capture
        self.transcript: dict[str, list[bytes]] = defaultdict(list)

    def record(self, flight: Flight, frame: bytes | None = None) -> None:
        with self._lock:
            self.flights.append(flight)
            if self.capture and frame is not None:
                self.transcript[link_name(flight.src, flight.dst)].append(frame)

    def mark(self) -> int:
        with self._lock:
            return len(self.flights)

    def view(self, start: int = 0, stop: int | None = None, *, min_op_seq: int = 0) -> "AccountingView":
        """Flights ``start:stop``, optionally only those from ops numbered ``>= min_op_seq``.

        Op numbers advance in lockstep on all parties, so ``min_op_seq`` cuts a
        session cleanly even though the parties' threads interleave.
        """
        with self._lock:
            fl = self.flights[start:stop]
        return AccountingView([f for f in fl if f.op_seq >= min_op_seq])

    def report(self) -> dict:
        return self.view().report()


class AccountingView:
    """Aggregations over a fixed list of flights."""

    def __init__(self, flights: list[Flight]):
        self.flights = flights

    def links(self) -> dict:
        out = {link_name(s, d): {"payload_bits": 0, "raw_bytes": 0, "flights": 0} for s, d in LINKS}
        for f in self.flights:
            row = out[link_name(f.src, f.dst)]
            row["payload_bits"] += f.payload_bits
            row["raw_bytes"] += f.raw_bytes
            row["flights"] += 1
        return out

    def total_payload_bits(self, online_only: bool = False) -> int:
        return sum(f.payload_bits for f in self.flights if not (online_only and f.offline))

    def link_bits(self, src, dst, online_only: bool = False) -> int:
        return sum(
            f.payload_bits
            for f in self.flights
            if f.src == src and f.dst == dst and not (online_only and f.offline)
        )

    def link_bytes(self, src, dst) -> int:
        return sum(f.raw_bytes for f in self.flights if f.src == src and f.dst == dst)

    def invocations(self) -> list[dict]:
        groups: dict[int, list[Flight]] = defaultdict(list)
        for f in self.flights:
            groups[f.op_seq].append(f)
        out = []
        for seq in sorted(groups):
            fl = groups[seq]
            online = [f for f in fl if not f.offline]
            out.append(
                {
                    "op": fl[0].op,
                    "op_seq": seq,
                    "rounds": max((f.depth for f in online), default=0),
                    "flights": len(fl),
                    "payload_bits": sum(f.payload_bits for f in online),
                    "offline_bits": sum(f.payload_bits for f in fl if f.offline),
                    "clip_bits": sum(f.clip_bits for f in fl),
                    "raw_bytes": sum(f.raw_bytes for f in fl),
                }
            )
        return out

    def rounds(self) -> int:
        return max((inv["rounds"] for inv in self.invocations()), default=0)

    def per_op(self) -> dict:
        agg: dict[str, dict] = {}
        for inv in self.invocations():
            row = agg.setdefault(
                inv["op"],
                {"calls": 0, "rounds_max": 0, "rounds_total": 0, "payload_bits": 0,
                 "offline_bits": 0, "clip_bits": 0, "raw_bytes": 0},
            )
            row["calls"] += 1
            row["rounds_max"] = max(row["rounds_max"], inv["rounds"])
            row["rounds_total"] += inv["rounds"]
            for key in ("payload_bits", "offline_bits", "clip_bits", "raw_bytes"):
                row[key] += inv[key]
        return agg

    def report(self) -> dict:
        return {
            "links": self.links(),
            "per_op": self.per_op(),
            "total_payload_bits": self.total_payload_bits(),
            "online_payload_bits": self.total_payload_bits(online_only=True),
            "total_raw_bytes": sum(f.raw_bytes for f in self.flights),
            "rounds_total": sum(inv["rounds"] for inv in self.invocations()),
            "reference_relu_costs": REFERENCE_RELU_COSTS,
        }

    def as_rows(self) -> list[dict]:
        return [asdict(f) for f in self.flights]
