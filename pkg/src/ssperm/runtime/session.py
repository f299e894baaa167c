"""Running a program on all three parties.

A *program* is a callable ``program(party) -> result`` that every role
executes. :func:`run_local` runs the three roles on threads joined by
in-process queues; :func:`run_party` runs a single role over TCP.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

from ..ring import FixedPointConfig
from ..sharing import PartyId
from .accounting import TrafficAccounting
from .config import SessionConfig
from .party import Party, Shadow
from .transport import LinkClosed, LocalHub, TcpTransport
from .wire import MsgType

log = logging.getLogger(__name__)


@dataclass
class SessionResult:
    outputs: list
    accounting: TrafficAccounting
    shadow: Shadow | None = None
    parties: list = field(default_factory=list)

    def report(self) -> dict:
        return self.accounting.report()

    def timings(self) -> dict:
        """Per-op wall time, taking the slowest party for each op."""
        out: dict[str, float] = {}
        for p in self.parties:
            for name, sec in p.timings.items():
                out[name] = max(out.get(name, 0.0), sec)
        return out


def run_local(
    program,
    config: SessionConfig | None = None,
    *,
    capture: bool = False,
    debug: bool | None = None,
    timeout: float = 120.0,
) -> SessionResult:
    """Run ``program`` on P0, P1 and P2 in this process.

    If any party raises, the links are closed so the others unblock, and the
    first real error (not the resulting ``LinkClosed``) is re-raised.
    """
    config = config or SessionConfig()
    debug = config.debug if debug is None else debug
    hub = LocalHub(timeout)
    accounting = TrafficAccounting(capture=capture)
    shadow = Shadow(FixedPointConfig(config.precision)) if debug else None
    parties = [Party(r, config, hub.endpoint(r), accounting, shadow) for r in PartyId]
    outputs: list = [None] * 3
    errors: list = [None] * 3

    def worker(i: int) -> None:
        try:
            outputs[i] = program(parties[i])
        except BaseException as e:  # noqa: BLE001 - re-raised in the caller
            errors[i] = e
            hub.close()

    threads = [threading.Thread(target=worker, args=(i,), name=f"party-{i}") for i in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    real = [e for e in errors if e is not None and not isinstance(e, LinkClosed)]
    if real:
        raise real[0]
    closed = [e for e in errors if e is not None]
    if closed:
        raise closed[0]
    return SessionResult(outputs, accounting, shadow, parties)


def _teardown(party: Party) -> None:
    # everyone tells everyone it is done, so no socket closes under a reader
    with party.op("teardown"):
        for peer in PartyId:
            if peer != party.role:
                party.send(peer, MsgType.CONTROL, 0)
        for peer in PartyId:
            if peer != party.role:
                party.recv(peer, MsgType.CONTROL)


def run_party(
    role,
    config: SessionConfig,
    program,
    *,
    connect_timeout: float = 30.0,
    timeout: float = 300.0,
) -> tuple[object, Party]:
    """Run one role over TCP; returns ``(program result, party)``."""
    role = PartyId.parse(role)
    addresses = {PartyId.parse(k): v for k, v in config.addresses.items()}
    transport = TcpTransport(role, addresses, config.session_id, connect_timeout, timeout)
    party = Party(role, config, transport, TrafficAccounting())
    try:
        result = program(party)
        _teardown(party)
    finally:
        transport.close()
    return result, party
