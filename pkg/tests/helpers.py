import socket

import numpy as np

from ssperm.ring import decode
from ssperm.runtime import SessionConfig


def free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def tcp_config(**kw):
    ports = free_ports(3)
    addrs = {f"p{i}": f"127.0.0.1:{p}" for i, p in enumerate(ports)}
    return SessionConfig(mode="tcp", addresses=addrs, **kw)


def opened(res, i=0):
    """Decoded output from party ``i`` of a local session."""
    return decode(res.outputs[i])


def close(a, b, ulps, cfg_ulp=2.0**-23):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) <= ulps * cfg_ulp + 1e-12
