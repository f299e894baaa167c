import json
import threading

import numpy as np
import pytest

from helpers import tcp_config
from ssperm import protocols as P
from ssperm.runtime import (
    ConfigError,
    Flight,
    LinkClosed,
    LocalHub,
    ProtocolError,
    SessionConfig,
    TcpTransport,
    TrafficAccounting,
    run_local,
    run_party,
)
from ssperm.runtime.wire import MsgType
from ssperm.sharing import PartyId

P0, P1, P2 = PartyId


# --- config ------------------------------------------------------------------

def test_config_roundtrip(tmp_path):
    cfg = SessionConfig(precision=20, data_seed=5, clip_mode="eager", job={"kind": "infer"})
    path = tmp_path / "c.json"
    cfg.dump(path)
    back = SessionConfig.load(path)
    assert back == cfg and back.session_id == cfg.session_id
    assert len(cfg.pair_seed("p0p1")) == 32 and cfg.pair_seed("p0p1") != cfg.pair_seed("p1p2")


def test_config_seed_derivation_depends_on_data_seed():
    assert SessionConfig(data_seed=1).pair_seed("p0p1") != SessionConfig(data_seed=2).pair_seed("p0p1")
    assert SessionConfig(data_seed=1).session_id != SessionConfig(data_seed=2).session_id


@pytest.mark.parametrize(
    "bad",
    [{"mode": "udp"}, {"clip_mode": "lazy"}, {"precision": 0}, {"bogus": 1}],
)
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        SessionConfig.from_dict(bad)


def test_config_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        SessionConfig.load(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        SessionConfig.load(p)


# --- transport ---------------------------------------------------------------

def test_local_hub_fifo_and_close():
    hub = LocalHub(timeout=1.0)
    a, b = hub.endpoint(P0), hub.endpoint(P1)
    a.send(P1, b"one", 1)
    a.send(P1, b"two", 2)
    assert b.recv(P0) == (b"one", 1)
    assert b.recv(P0) == (b"two", 2)
    hub.close()
    with pytest.raises(LinkClosed):
        b.recv(P0)


def test_local_hub_timeout():
    hub = LocalHub(timeout=0.05)
    with pytest.raises(LinkClosed):
        hub.endpoint(P0).recv(P1)


def test_tcp_transport_loopback():
    cfg = tcp_config()
    addrs = {PartyId.parse(k): v for k, v in cfg.addresses.items()}
    got = {}

    def run(role):
        t = TcpTransport(role, addrs, 77, connect_timeout=10, timeout=10)
        try:
            nxt = PartyId((role + 1) % 3)
            prv = PartyId((role - 1) % 3)
            t.send(nxt, bytes([role]) * (1 + role * 1000), role + 1)
            got[role] = t.recv(prv)
        finally:
            t.close()

    threads = [threading.Thread(target=run, args=(r,)) for r in PartyId]
    for t in threads:
        t.start()
    for t in threads:
        t.join(20)
    assert got[P1] == (b"\x00", 1)
    assert got[P2] == (b"\x01" * 1001, 2)
    assert got[P0] == (b"\x02" * 2001, 3)


# --- accounting --------------------------------------------------------------

def _flight(op_seq, depth, bits, src=P0, dst=P1, offline=False, op="mul"):
    return Flight(int(src), int(dst), "OPEN_VALUE", op, op_seq, bits, 0, bits // 8 + 26, depth, offline)


def test_accounting_aggregates():
    acc = TrafficAccounting()
    acc.record(_flight(1, 1, 128))
    acc.record(_flight(1, 2, 64, src=P1, dst=P0))
    acc.record(_flight(1, 0, 192, src=P2, dst=P0, offline=True))
    acc.record(_flight(2, 1, 64, op="cap"))
    v = acc.view()
    assert v.total_payload_bits() == 448
    assert v.total_payload_bits(online_only=True) == 256
    assert v.link_bits(P0, P1) == 192
    assert v.rounds() == 2
    per = v.per_op()
    assert per["mul"]["calls"] == 1 and per["mul"]["offline_bits"] == 192 and per["mul"]["rounds_max"] == 2
    assert acc.view(min_op_seq=2).total_payload_bits() == 64
    assert acc.view(1).total_payload_bits() == 320
    assert v.links()["P2->P0"]["flights"] == 1


# --- party engine --------------------------------------------------------------

def test_protocol_error_on_unexpected_message():
    def program(party):
        if party.role == P0:
            party.send(P1, MsgType.OPEN_VALUE, 5, [np.zeros(1, np.uint64)])
        elif party.role == P1:
            party.recv(P0, MsgType.TENSOR_SHARES, 5)

    with pytest.raises(ProtocolError):
        run_local(program, timeout=5)


def test_session_mismatch_detected():
    from ssperm.runtime import LocalHub, Party
    from ssperm.runtime.wire import Message, encode_message

    hub = LocalHub(timeout=1)
    cfg = SessionConfig()
    party = Party(P1, cfg, hub.endpoint(P1), TrafficAccounting())
    hub.endpoint(P0).send(P1, encode_message(Message(MsgType.OPEN_VALUE, cfg.session_id ^ 1, 0)), 1)
    with pytest.raises(ProtocolError):
        party.recv(P0, MsgType.OPEN_VALUE)


def test_error_in_one_party_unblocks_others():
    def program(party):
        if party.role == P2:
            raise RuntimeError("boom")
        party.recv(P2, MsgType.OPEN_VALUE)

    with pytest.raises(RuntimeError, match="boom"):
        run_local(program, timeout=30)


def _mixed_program(party):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 5)) if party.role == P0 else None
    w = rng.normal(size=(5, 3)) if party.role == P0 else None
    X = P.share_input(party, x, P0, (4, 5))
    W = P.share_input(party, w, P0, (5, 3))
    Z = P.cap(X @ W, P.ElementwiseFn.SIGMOID, flipping=True)
    return P.reveal(Z * Z)


def test_transcript_deterministic():
    a = run_local(_mixed_program, SessionConfig(data_seed=9), capture=True)
    b = run_local(_mixed_program, SessionConfig(data_seed=9), capture=True)
    assert a.accounting.transcript and a.accounting.transcript == b.accounting.transcript
    c = run_local(_mixed_program, SessionConfig(data_seed=10), capture=True)
    assert c.accounting.transcript != a.accounting.transcript


def test_tcp_matches_local():
    local = run_local(_mixed_program, SessionConfig(data_seed=4))
    cfg = tcp_config(data_seed=4)
    out = {}

    def run(role):
        out[role] = run_party(role, cfg, _mixed_program, connect_timeout=10, timeout=30)[0]

    threads = [threading.Thread(target=run, args=(r,)) for r in PartyId]
    for t in threads:
        t.start()
    for t in threads:
        t.join(60)
    assert np.array_equal(out[P0], local.outputs[0])
    assert np.array_equal(out[P1], local.outputs[1])


def test_shadow_tracks_values():
    res = run_local(_mixed_program, SessionConfig(debug=True))
    assert res.shadow is not None and res.shadow.values and not res.shadow.violations
    assert 0 < res.shadow.max_abs < 100
