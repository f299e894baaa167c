"""
What the helper party sees during compute-after-permutation
===========================================================

For an activation, P0 and P1 permute their shares with a permutation only
they know and send them to P2. P2 learns the multiset of values but not
their order. For sigmoid and tanh the two parties can also negate a random
subset first, which hides the signs.
"""
import numpy as np

from ssperm import protocols as P
from ssperm.ring import decode, ring_add
from ssperm.runtime import run_local
from ssperm.sharing import PartyId

z = np.linspace(0.5, 5.0, 10)  # all positive, ordered


def program(party, flipping):
    if party.role == PartyId.P2:
        party.view_log = []
    Z = P.share_input(party, z if party.role == PartyId.P0 else None, PartyId.P0, z.shape)
    out = P.reveal_float(P.cap(Z, "sigmoid", flipping=flipping))
    return out if party.role != PartyId.P2 else party.view_log


for flipping in (False, True):
    res = run_local(lambda p: program(p, flipping))
    log = res.outputs[2]
    seen = decode(ring_add(log[0][1], log[1][1]))
    print(f"flipping={flipping}")
    print("  P2 saw:      ", np.round(seen, 2))
    print("  P0 result:   ", np.round(res.outputs[0], 4))
print("  float sigmoid:", np.round(1 / (1 + np.exp(-z)), 4))
