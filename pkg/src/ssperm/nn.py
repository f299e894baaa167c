"""Secret-shared fully connected networks and a float reference.

The forward pass is ``Z = A @ W + b`` followed by the layer's activation via
:func:`~ssperm.protocols.cap` (random flipping only on the output layer,
and only for sigmoid/tanh). Training is plain mini-batch SGD on the squared
error; the update for a batch of ``B`` rows is::

    g   = 2 * (Y_hat - Y)
    g   = act'(Z_i) * g                (per layer, output to input)
    W_i = W_i - (lr / B) * A_{i-1}^T @ g
    b_i = b_i - (lr / B) * sum_rows(g)
    g   = g @ W_i^T                    (old W_i)

:class:`FloatNetwork` runs exactly the same recurrence in float64.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import protocols as P
from .protocols import ElementwiseFn
from .sharing import PartyId, SharedTensor

log = logging.getLogger(__name__)

IDENTITY = "identity"
PRESETS = {
    "lr": "{dim}-1-sigmoid",
    "dnn1": "{dim}-{hidden}-relu-1-sigmoid",
    "dnn2": "{dim}-{hidden}-relu-1-sigmoid",
}


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str  # an ElementwiseFn value or "identity"

    @property
    def fn(self) -> ElementwiseFn | None:
        return None if self.activation == IDENTITY else ElementwiseFn.parse(self.activation)


def parse_arch(spec: str) -> list[LayerSpec]:
    """Parse ``"20-16-relu-1-sigmoid"`` into layer specs.

    The string alternates widths and activations, starting with the input
    width; every width after the first must be followed by an activation.
    """
    parts = [p.strip().lower() for p in spec.split("-") if p.strip()]
    if len(parts) < 3 or len(parts) % 2 == 0:
        raise ValueError(f"bad architecture {spec!r}: expected in-out-act[-out-act...]")
    try:
        widths = [int(parts[0])] + [int(p) for p in parts[1::2]]
    except ValueError:
        raise ValueError(f"bad architecture {spec!r}: widths must be integers") from None
    acts = parts[2::2]
    if any(w < 1 for w in widths):
        raise ValueError(f"bad architecture {spec!r}: widths must be positive")
    for a in acts:
        if a != IDENTITY:
            ElementwiseFn.parse(a)
        if a == ElementwiseFn.RELU_DERIV.value:
            raise ValueError("relu_deriv is not a layer activation")
    return [LayerSpec(widths[i], widths[i + 1], acts[i]) for i in range(len(acts))]


def arch_string(layers: list[LayerSpec]) -> str:
    parts = [str(layers[0].fan_in)]
    for l in layers:
        parts += [str(l.fan_out), l.activation]
    return "-".join(parts)


def init_params(layers: list[LayerSpec], seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gaussian ``N(0, 1/fan_in)`` weights and zero biases."""
    rng = np.random.default_rng(seed)
    return [
        (rng.normal(0.0, 1.0 / np.sqrt(l.fan_in), size=(l.fan_in, l.fan_out)), np.zeros(l.fan_out))
        for l in layers
    ]


def flip_last(layers: list[LayerSpec]) -> bool:
    fn = layers[-1].fn
    return fn is not None and fn.flip_compatible


@dataclass
class TrainConfig:
    lr: float = 0.1
    epochs: int = 1
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def batch_schedule(n: int, batch_size: int, epoch: int, seed: int) -> list[np.ndarray]:
    """Row indices of each mini-batch in one epoch (last batch may be short)."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def accuracy(pred: np.ndarray, y: np.ndarray, activation: str = "sigmoid") -> float:
    pred = np.asarray(pred, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if pred.ndim == 2 and pred.shape[1] > 1:
        return float(np.mean(pred.argmax(1) == y.argmax(1)))
    thr = 0.0 if activation == "tanh" else 0.5
    return float(np.mean((pred.ravel() > thr) == (y.ravel() > thr)))


# ----------------------------------------------------------------------------
# float reference


class FloatNetwork:
    """Float64 twin of :class:`Network` with identical update rules."""

    def __init__(self, layers: list[LayerSpec], params):
        self.layers = list(layers)
        self.params = [(np.array(W, dtype=np.float64), np.array(b, dtype=np.float64)) for W, b in params]

    def forward(self, X: np.ndarray):
        A = np.asarray(X, dtype=np.float64)
        As, Zs = [A], [None]
        for spec, (W, b) in zip(self.layers, self.params):
            Z = A @ W + b
            A = Z if spec.fn is None else spec.fn(Z)
            Zs.append(Z)
            As.append(A)
        return As, Zs

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.forward(X)[0][-1]

    def gradients(self, X: np.ndarray, Y: np.ndarray):
        """Gradients of ``sum((Y_hat - Y)^2)`` (not averaged)."""
        As, Zs = self.forward(X)
        g = 2.0 * (As[-1] - np.asarray(Y, dtype=np.float64))
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            g = _float_deriv(self.layers[i].activation, Zs[i + 1], As[i + 1]) * g
            grads[i] = (As[i].T @ g, g.sum(axis=0))
            g = g @ self.params[i][0].T
        return grads

    def step(self, X: np.ndarray, Y: np.ndarray, lr: float) -> None:
        scale = lr / X.shape[0]
        grads = self.gradients(X, Y)
        self.params = [(W - scale * gW, b - scale * gb) for (W, b), (gW, gb) in zip(self.params, grads)]

    def loss(self, X: np.ndarray, Y: np.ndarray) -> float:
        return float(np.sum((self.predict(X) - Y) ** 2))


def _float_deriv(activation: str, Z: np.ndarray, A: np.ndarray) -> np.ndarray:
    if activation == IDENTITY:
        return np.ones_like(Z)
    if activation == "relu":
        return (Z > 0).astype(np.float64)
    if activation == "sigmoid":
        return A * (1.0 - A)
    if activation == "tanh":
        return 1.0 - A * A
    raise ValueError(activation)


# ----------------------------------------------------------------------------
# shared network


@dataclass
class LayerParams:
    W: SharedTensor
    b: SharedTensor
    activation: str


@dataclass
class Network:
    layers: list[LayerParams]
    cache: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least one layer")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def specs(self) -> list[LayerSpec]:
        return [LayerSpec(l.W.shape[0], l.W.shape[1], l.activation) for l in self.layers]

    @classmethod
    def share(cls, party, layers: list[LayerSpec], params=None, owner=PartyId.P0) -> "Network":
        """Share float parameters held by ``owner`` (others pass ``params=None``)."""
        out = []
        for i, spec in enumerate(layers):
            W = b = None
            if params is not None:
                W, b = params[i]
            Ws = P.share_input(party, W, owner, (spec.fan_in, spec.fan_out))
            bs = P.share_input(party, b, owner, (spec.fan_out,))
            out.append(LayerParams(Ws, bs, spec.activation))
        return cls(out)

    def reveal(self, to=None):
        """Open all parameters; returns float ``(W, b)`` pairs on recipients."""
        out = []
        for l in self.layers:
            W = P.reveal_float(l.W, to)
            b = P.reveal_float(l.b, to)
            out.append(None if W is None else (W, b))
        return None if out[0] is None else out


def nn_infer(X: SharedTensor, net: Network) -> SharedTensor:
    """Forward pass; keeps ``(A_i, Z_i)`` on ``net.cache`` for backprop."""
    if X.ndim != 2 or X.shape[1] != net.layers[0].W.shape[0]:
        raise P.ShapeMismatch(f"input {X.shape} does not fit first layer {net.layers[0].W.shape}")
    A = X
    As, Zs = [A], [None]
    last = net.num_layers - 1
    for i, layer in enumerate(net.layers):
        Z = P.add_bias(P.matmul_shared(A, layer.W), layer.b)
        if layer.activation == IDENTITY:
            A = Z
        else:
            fn = ElementwiseFn.parse(layer.activation)
            A = P.cap(Z, fn, flipping=(i == last and fn.flip_compatible))
        Zs.append(Z)
        As.append(A)
    net.cache = (As, Zs)
    return A


def _shared_deriv_times(activation: str, Z: SharedTensor, A: SharedTensor, g: SharedTensor):
    if activation == IDENTITY:
        return g
    if activation == "relu":
        d = P.cap(Z, ElementwiseFn.RELU_DERIV)
    elif activation == "sigmoid":
        d = P.mul_shared(A, P.sub_from_public(1.0, A))
    elif activation == "tanh":
        d = P.sub_from_public(1.0, P.mul_shared(A, A))
    else:
        raise ValueError(f"no derivative for {activation!r}")
    return P.mul_shared(d, g)


def nn_backprop(X: SharedTensor, Y: SharedTensor, net: Network, cfg: TrainConfig) -> Network:
    """One SGD step on a batch; parameters of ``net`` are replaced in place."""
    Y_hat = nn_infer(X, net)
    if Y.shape != Y_hat.shape:
        raise P.ShapeMismatch(f"labels {Y.shape} do not match outputs {Y_hat.shape}")
    As, Zs = net.cache
    scale = cfg.lr / X.shape[0]
    g = P.mul_public(P.sub_shared(Y_hat, Y), 2)
    for i in range(net.num_layers - 1, -1, -1):
        layer = net.layers[i]
        g = _shared_deriv_times(layer.activation, Zs[i + 1], As[i + 1], g)
        grad_W = P.matmul_shared(P.transpose_local(As[i]), g)
        grad_b = P.sum_axis(g, 0)
        if i > 0:
            g = P.matmul_shared(g, P.transpose_local(layer.W))
        layer.W = P.sub_shared(layer.W, P.mul_public(grad_W, scale))
        layer.b = P.sub_shared(layer.b, P.mul_public(grad_b, scale))
    net.cache = ()
    return net


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    shared_acc: list = field(default_factory=list)
    float_acc: list = field(default_factory=list)

    def rows(self) -> list[dict]:
        out = []
        for i, e in enumerate(self.epochs):
            row = {"epoch": e, "shared_acc": self.shared_acc[i]}
            if self.float_acc:
                row["float_acc"] = self.float_acc[i]
            out.append(row)
        return out


def train_shared(
    party,
    layers: list[LayerSpec],
    cfg: TrainConfig,
    X_train=None,
    Y_train=None,
    X_val=None,
    Y_val=None,
    *,
    shapes=None,
    compare_plaintext: bool = False,
):
    """Train on data held by P0; every party calls this.

    Non-owners pass ``shapes = (train_x, train_y, val_x, val_y)`` instead of
    the arrays. Returns ``(network, history, float_network_or_None)``; the
    history is filled on P0 and P1 (they see the revealed validation
    predictions).
    """
    owner = PartyId.P0
    holds = party.role == owner
    if shapes is None:
        shapes = (np.shape(X_train), np.shape(Y_train), np.shape(X_val), np.shape(Y_val))
    params = init_params(layers, cfg.seed)
    net = Network.share(party, layers, params if holds else None, owner)
    Xs = P.share_input(party, X_train if holds else None, owner, shapes[0])
    Ys = P.share_input(party, Y_train if holds else None, owner, shapes[1])
    Xv = P.share_input(party, X_val if holds else None, owner, shapes[2])
    ref = FloatNetwork(layers, params) if compare_plaintext and holds else None
    hist = TrainHistory()
    out_act = layers[-1].activation

    def evaluate(epoch: int) -> None:
        pred = P.reveal_float(nn_infer(Xv, net))
        net.cache = ()
        if pred is None:
            return
        hist.epochs.append(epoch)
        if Y_val is not None:
            hist.shared_acc.append(accuracy(pred, Y_val, out_act))
            if ref is not None:
                hist.float_acc.append(accuracy(ref.predict(X_val), Y_val, out_act))
        else:
            hist.shared_acc.append(float("nan"))

    evaluate(0)
    n = shapes[0][0]
    for epoch in range(1, cfg.epochs + 1):
        for idx in batch_schedule(n, cfg.batch_size, epoch, cfg.seed):
            nn_backprop(P.take_rows(Xs, idx), P.take_rows(Ys, idx), net, cfg)
            if ref is not None:
                ref.step(X_train[idx], Y_train[idx], cfg.lr)
        evaluate(epoch)
        if hist.shared_acc:
            log.info("epoch %d: shared acc %.4f", epoch, hist.shared_acc[-1])
    return net, hist, ref
