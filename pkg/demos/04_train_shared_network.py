"""
Training a secret-shared network next to its float twin
=======================================================

Synthetic two-class data, a 20-16-relu-1-sigmoid network, plain SGD on the
squared error. Both models start from the same weights and see the same
mini-batches, so their accuracy curves should lie on top of each other.
"""
from ssperm import nn
from ssperm.data import split, two_gaussians
from ssperm.runtime import run_local
from ssperm.sharing import PartyId

X, Y = two_gaussians(1000, 20, seed=3)
Xt, Yt, Xv, Yv = split(X, Y, val_frac=0.2)
layers = nn.parse_arch("20-16-relu-1-sigmoid")
cfg = nn.TrainConfig(lr=0.1, epochs=10, batch_size=64, seed=3)
shapes = (Xt.shape, Yt.shape, Xv.shape, Yv.shape)


def program(party):
    data = (Xt, Yt, Xv, Yv) if party.role == PartyId.P0 else (None,) * 4
    _, hist, _ = nn.train_shared(party, layers, cfg, *data, shapes=shapes, compare_plaintext=True)
    return hist


res = run_local(program)
for row in res.outputs[0].rows():
    print(f"epoch {row['epoch']:>2}  shared {row['shared_acc']:.3f}  float {row['float_acc']:.3f}")

traffic = res.report()
print(f"total traffic {traffic['total_payload_bits'] / 8e6:.1f} MB over {traffic['rounds_total']} rounds")
