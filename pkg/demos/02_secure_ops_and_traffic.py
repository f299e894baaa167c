"""
Secure arithmetic between three simulated parties
=================================================

P0 and P1 hold additive shares; P2 deals Beaver triples and evaluates
activations. ``run_local`` runs the three parties as threads and records
every message, so we can read off bits and rounds per operation.
"""
import numpy as np

from ssperm import protocols as P
from ssperm.runtime import run_local
from ssperm.sharing import PartyId

rng = np.random.default_rng(1)
X = rng.normal(size=(8, 5))
W = rng.normal(size=(5, 3))


def program(party):
    owner = party.role == PartyId.P0
    Xs = P.share_input(party, X if owner else None, PartyId.P0, X.shape)
    Ws = P.share_input(party, W if owner else None, PartyId.P0, W.shape)
    Z = Xs @ Ws                     # Beaver matmul, truncated once per output
    A = P.cap(Z, "relu")            # activation through P2 on permuted shares
    return P.reveal_float(A * A)    # elementwise Beaver product, then open


res = run_local(program)
want = np.maximum(X @ W, 0) ** 2
print("max |secure - float| =", np.abs(res.outputs[0] - want).max())

# %%
# Traffic per operation: payload bits count 64 per ring element or clip index.
rep = res.report()
print(f"{'op':<12}{'calls':>6}{'rounds':>8}{'online bits':>13}{'offline bits':>14}")
for op, row in rep["per_op"].items():
    print(f"{op:<12}{row['calls']:>6}{row['rounds_max']:>8}{row['payload_bits']:>13}{row['offline_bits']:>14}")
print("P2 -> P1 bytes:", rep["links"]["P2->P1"]["raw_bytes"], "(P1's randomness comes from a shared PRG)")
