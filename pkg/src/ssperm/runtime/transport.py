"""Per-link FIFO transports: in-process queues and TCP.

Each item on a link is a frame (see :mod:`.wire`) plus the causal depth the
sender assigned to it. Depth only feeds round accounting; it never reaches
protocol logic.

TCP mode keeps one duplex connection per party pair. Party ``i`` connects to
every ``j > i``; the connecting side opens with ``b"SSRP", u8 role,
u32 session_id``. Each frame then travels as ``u64 frame_len, u32 depth,
frame``. A reader thread per connection fills the mailbox so sends never
block on the peer.
"""
from __future__ import annotations

import itertools
import logging
import queue
import socket
import struct
import threading
import time

from ..sharing import PartyId

log = logging.getLogger(__name__)

_CLOSED = object()
ENVELOPE = struct.Struct("<QI")
HELLO = struct.Struct("<4sBI")


class LinkClosed(ConnectionError):
    pass


class Transport:
    role: PartyId

    def send(self, to: PartyId, frame: bytes, depth: int) -> None:
        raise NotImplementedError

    def recv(self, frm: PartyId, timeout: float | None = None) -> tuple[bytes, int]:
        raise NotImplementedError

    def close(self) -> None:
        pass


class LocalHub:
    """Six in-process FIFO links between the three parties."""

    def __init__(self, timeout: float = 120.0):
        self.timeout = timeout
        self.closed = False
        self.queues = {
            (PartyId(s), PartyId(d)): queue.SimpleQueue()
            for s, d in itertools.permutations(range(3), 2)
        }

    def endpoint(self, role) -> "LocalTransport":
        return LocalTransport(PartyId(role), self)

    def close(self) -> None:
        self.closed = True
        for q in self.queues.values():
            q.put(_CLOSED)


class LocalTransport(Transport):
    def __init__(self, role: PartyId, hub: LocalHub):
        self.role = role
        self.hub = hub

    def send(self, to, frame, depth):
        if self.hub.closed:
            raise LinkClosed("session closed")
        self.hub.queues[(self.role, PartyId(to))].put((frame, depth))

    def recv(self, frm, timeout=None):
        q = self.hub.queues[(PartyId(frm), self.role)]
        try:
            item = q.get(timeout=timeout if timeout is not None else self.hub.timeout)
        except queue.Empty:
            raise LinkClosed(f"{self.role} timed out waiting for {PartyId(frm)}") from None
        if item is _CLOSED:
            q.put(_CLOSED)
            raise LinkClosed(f"link {PartyId(frm)}->{self.role} closed")
        return item


def parse_address(addr) -> tuple[str, int]:
    if isinstance(addr, (tuple, list)):
        return str(addr[0]), int(addr[1])
    host, _, port = str(addr).rpartition(":")
    return host or "127.0.0.1", int(port)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(min(n - len(buf), 1 << 20))
        if not chunk:
            raise LinkClosed("connection closed by peer")
        buf += chunk
    return bytes(buf)


class TcpTransport(Transport):
    def __init__(
        self,
        role,
        addresses: dict,
        session_id: int,
        connect_timeout: float = 30.0,
        timeout: float = 300.0,
    ):
        self.role = PartyId(role)
        self.session_id = session_id
        self.timeout = timeout
        self._socks: dict[PartyId, socket.socket] = {}
        self._locks: dict[PartyId, threading.Lock] = {}
        self._mail: dict[PartyId, queue.SimpleQueue] = {}
        addrs = {PartyId(k): parse_address(v) for k, v in addresses.items()}
        lower = [p for p in PartyId if p < self.role]
        higher = [p for p in PartyId if p > self.role]

        listener = None
        if lower:
            listener = socket.create_server(addrs[self.role], reuse_port=False)
            listener.settimeout(connect_timeout)
        try:
            for peer in higher:
                sock = self._connect(addrs[peer], connect_timeout)
                sock.sendall(HELLO.pack(b"SSRP", int(self.role), session_id))
                self._register(peer, sock)
            for _ in lower:
                try:
                    sock, _ = listener.accept()
                except socket.timeout:
                    raise LinkClosed(f"{self.role}: no connection from lower parties") from None
                sock.settimeout(connect_timeout)
                magic, peer_role, sid = HELLO.unpack(_recv_exact(sock, HELLO.size))
                if magic != b"SSRP" or sid != session_id:
                    sock.close()
                    raise LinkClosed("handshake failed: session config differs between parties")
                sock.settimeout(None)
                self._register(PartyId(peer_role), sock)
        finally:
            if listener is not None:
                listener.close()

    @staticmethod
    def _connect(addr, timeout: float) -> socket.socket:
        deadline = time.monotonic() + timeout
        while True:
            try:
                sock = socket.create_connection(addr, timeout=timeout)
                sock.settimeout(None)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                return sock
            except OSError:
                if time.monotonic() > deadline:
                    raise LinkClosed(f"could not connect to {addr}") from None
                time.sleep(0.05)

    def _register(self, peer: PartyId, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._socks[peer] = sock
        self._locks[peer] = threading.Lock()
        self._mail[peer] = queue.SimpleQueue()
        t = threading.Thread(target=self._reader, args=(peer, sock), daemon=True)
        t.start()

    def _reader(self, peer: PartyId, sock: socket.socket) -> None:
        mailbox = self._mail[peer]
        try:
            while True:
                length, depth = ENVELOPE.unpack(_recv_exact(sock, ENVELOPE.size))
                mailbox.put((_recv_exact(sock, length), depth))
        except (LinkClosed, OSError) as e:
            log.debug("reader %s<-%s stopped: %s", self.role, peer, e)
            mailbox.put(_CLOSED)

    def send(self, to, frame, depth):
        to = PartyId(to)
        try:
            with self._locks[to]:
                self._socks[to].sendall(ENVELOPE.pack(len(frame), depth) + frame)
        except OSError as e:
            raise LinkClosed(f"send to {to} failed: {e}") from None

    def recv(self, frm, timeout=None):
        q = self._mail[PartyId(frm)]
        try:
            item = q.get(timeout=timeout if timeout is not None else self.timeout)
        except queue.Empty:
            raise LinkClosed(f"{self.role} timed out waiting for {PartyId(frm)}") from None
        if item is _CLOSED:
            q.put(_CLOSED)
            raise LinkClosed(f"link {PartyId(frm)}->{self.role} closed")
        return item

    def close(self) -> None:
        for sock in self._socks.values():
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            sock.close()
