"""
Fixed-point shares and why P0 clips its share
=============================================

Reals are stored as 64-bit integers scaled by 2^p. Multiplying two of them
doubles the scale, so each party shifts its own share right by p bits.
That local shift goes wrong when a share sits near the wrap-around point of
the ring; clipping P0's share into [-2^62, 2^62) first fixes it.
"""
import numpy as np

from ssperm import protocols as P
from ssperm.ring import FixedPointConfig, decode, encode, ring_add, signed, truncate_plain

cfg = FixedPointConfig(precision=20)

# the value 2 at scale 2^20, split into two shares that both sit near 2^63
s = np.array([(1 << 63) + (1 << 20)], dtype=np.uint64)
print("reconstructed raw value:", int(ring_add(s, s)[0]), "= 2^21")

# shifting each share on its own (logical shift, as a naive implementation would)
naive = int(((s >> np.uint64(20)) + (s >> np.uint64(20)))[0])
print("naive per-share shift:  ", hex(naive), "(should be 2)")

# ShareClip: P0 moves its share into range, P1 compensates
s0, over, under = P.clip_share(s)
s1 = P.clip_peer_share(s, over, under)
print("P0 share after clip (signed):", int(signed(s0)[0]))
fixed = ring_add(truncate_plain(s0, cfg), truncate_plain(s1, cfg))
print("per-share truncation after clip:", int(fixed[0]))

# %%
# The same thing over many random sharings: the error is never more than 1 ulp.
rng = np.random.default_rng(0)
x = rng.integers(-(1 << 60), 1 << 60, size=100000).view(np.uint64)
r = rng.integers(0, 2**64, size=x.size, dtype=np.uint64, endpoint=False)
a, over, under = P.clip_share(r)
b = P.clip_peer_share(np.asarray(x - r), over, under)
err = signed(ring_add(truncate_plain(a, cfg), truncate_plain(b, cfg)) - truncate_plain(x, cfg))
vals, counts = np.unique(err, return_counts=True)
print("error histogram (ulps):", {int(v): int(c) for v, c in zip(vals, counts)})

# %%
# Encoding round trip at the default precision
cfg23 = FixedPointConfig()
vals = np.array([3.14159, -2.5, 1e-7])
print("decode(encode(x)):", decode(encode(vals, cfg23), cfg23), "ulp =", cfg23.ulp)
