"""Feed-forward network with the quantization clip-floor-shift (QCFS) activation.

Hidden layers compute ``a = qcfs(W a_prev + b)`` with a learnable per-layer
threshold ``lam``; the last layer emits raw logits.  Gradients are written by
hand and the threshold is trained with a straight-through estimator.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .tensor import TRAIN_DTYPE, DimensionError, Rng, level_value, matmul, rand_uniform

LAMBDA_INIT = 4.0
LAMBDA_MIN = 1e-4
SHIFT = 0.5


@dataclass
class QcfsParams:
    lam: float = LAMBDA_INIT
    levels: int = 4
    shift: float = SHIFT

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError(f"levels must be a positive integer, got {self.levels}")
        self.levels = int(self.levels)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x):
        return matmul(x, self.weights.T) + self.bias


@dataclass
class AnnNetwork:
    layers: list[tuple[DenseLayer, QcfsParams]]
    output_layer: DenseLayer

    def __post_init__(self):
        dense = [layer for layer, _ in self.layers] + [self.output_layer]
        for prev, nxt in zip(dense, dense[1:]):
            if prev.n_out != nxt.n_in:
                raise DimensionError(
                    f"layer output {prev.weights.shape} does not feed {nxt.weights.shape}"
                )

    @property
    def sizes(self) -> list[int]:
        dense = [layer for layer, _ in self.layers] + [self.output_layer]
        return [dense[0].n_in] + [d.n_out for d in dense]

    @property
    def lambdas(self) -> list[float]:
        return [p.lam for _, p in self.layers]


def init_network(sizes, levels: int, rng: Rng, lam: float = LAMBDA_INIT) -> AnnNetwork:
    """He-uniform weights, zero biases, every threshold at ``lam``."""
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    dense = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / n_in)
        w = rand_uniform(rng, (n_out, n_in), -bound, bound).astype(TRAIN_DTYPE)
        dense.append(DenseLayer(w, np.zeros(n_out, dtype=TRAIN_DTYPE)))
    hidden = [(d, QcfsParams(lam, levels)) for d in dense[:-1]]
    return AnnNetwork(hidden, dense[-1])


def _steps(z, p: QcfsParams):
    # integer quantizer level in [0, L] before scaling back by lam / L
    return np.clip(np.floor(z * p.levels / p.lam + p.shift), 0, p.levels)


def qcfs_forward(z, p: QcfsParams):
    """``lam * clip(floor(z L / lam + shift) / L, 0, 1)``, computed as ``lam * k / L``."""
    z = np.asarray(z)
    dtype = z.dtype if np.issubdtype(z.dtype, np.floating) else np.float64
    k = _steps(z, p)
    return level_value(dtype.type(p.lam), k, p.levels).astype(dtype, copy=False)


def qcfs_backward(z, p: QcfsParams, upstream):
    """Straight-through gradients of ``qcfs_forward``.

    Returns ``(dz, dlam)``.  ``dz`` passes ``upstream`` where
    ``0 < z/lam + shift/L <= 1``.  ``dlam`` sums ``upstream * (c - z/lam)``
    over elements whose quantized level ``c = k/L`` lies strictly inside
    (0, 1), and ``upstream`` over elements saturated at ``lam``.
    """
    z = np.asarray(z)
    upstream = np.asarray(upstream)
    if z.shape != upstream.shape:
        raise DimensionError(f"z {z.shape} and upstream {upstream.shape} differ")
    L = p.levels
    u = z * L / p.lam + p.shift
    pass_mask = (u > 0) & (u <= L)
    dz = np.where(pass_mask, upstream, 0).astype(upstream.dtype, copy=False)

    k = np.clip(np.floor(u), 0, L)
    interior = (k > 0) & (k < L)
    upper = k >= L
    c = k / L
    dlam = np.sum(np.where(interior, upstream * (c - z / p.lam), 0), dtype=np.float64)
    dlam += np.sum(np.where(upper, upstream, 0), dtype=np.float64)
    return dz, float(dlam)


def ann_forward(net: AnnNetwork, x):
    """Returns ``(logits, acts, pre)``: per hidden layer activations and pre-activations."""
    a = np.asarray(x)
    if a.ndim == 1:
        a = a[None, :]
    first = net.layers[0][0] if net.layers else net.output_layer
    if a.shape[1] != first.n_in:
        raise DimensionError(f"input width {a.shape[1]} != first layer input {first.n_in}")
    acts, pre = [], []
    for layer, p in net.layers:
        z = layer(a)
        a = qcfs_forward(z, p)
        pre.append(z)
        acts.append(a)
    return net.output_layer(a), acts, pre


def predict(net: AnnNetwork, x):
    return np.argmax(ann_forward(net, x)[0], axis=1)


def accuracy(net: AnnNetwork, x, y) -> float:
    return float(np.mean(predict(net, x) == np.asarray(y)))


def softmax_xent(logits, labels):
    """Per-sample cross-entropy and its gradient w.r.t. logits (not batch-averaged)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    idx = np.arange(len(labels))
    loss = np.log(total[:, 0]) - shifted[idx, labels]
    grad = exp / total
    grad[idx, labels] -= 1
    return loss, grad


class TrainingError(RuntimeError):
    def __init__(self, msg, epoch=None):
        super().__init__(msg if epoch is None else f"epoch {epoch}: {msg}")
        self.epoch = epoch


@dataclass
class TrainLog:
    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)
    lambdas: list[list[float]] = field(default_factory=list)

    def to_dict(self):
        return {"loss": self.loss, "accuracy": self.accuracy, "lambdas": self.lambdas}


def _train_step(net, xb, yb, lr):
    logits, acts, pre = ann_forward(net, xb)
    loss, g = softmax_xent(logits, yb)
    g = (g / len(yb)).astype(TRAIN_DTYPE)

    inputs = [xb] + acts
    grads = []
    out = net.output_layer
    grads.append((matmul(g.T, inputs[-1]), g.sum(axis=0), None))
    g = matmul(g, out.weights)
    for i in range(len(net.layers) - 1, -1, -1):
        layer, p = net.layers[i]
        g, dlam = qcfs_backward(pre[i], p, g)
        grads.append((matmul(g.T, inputs[i]), g.sum(axis=0), dlam))
        if i:
            g = matmul(g, layer.weights)

    lr32 = TRAIN_DTYPE(lr)
    dense = [net.output_layer] + [layer for layer, _ in reversed(net.layers)]
    params = [None] + [p for _, p in reversed(net.layers)]
    for layer, p, (dw, db, dlam) in zip(dense, params, grads):
        layer.weights -= lr32 * dw.astype(TRAIN_DTYPE)
        layer.bias -= lr32 * db.astype(TRAIN_DTYPE)
        if p is not None:
            # lambda is stored at 32-bit precision like the weights
            p.lam = float(TRAIN_DTYPE(max(p.lam - lr * dlam, LAMBDA_MIN)))
    return loss, logits


def train(net: AnnNetwork, x, y, lr=0.1, epochs=100, batch=32, seed=0) -> TrainLog:
    """Minibatch SGD on softmax cross-entropy; updates ``net`` in place.

    The epoch loss is the mean of per-sample losses taken in dataset order,
    so it does not depend on the shuffle.
    """
    x = np.asarray(x, dtype=TRAIN_DTYPE)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise TrainingError("empty dataset")
    n_classes = net.output_layer.n_out
    if y.min() < 0 or y.max() >= n_classes:
        raise TrainingError(f"labels outside [0, {n_classes})")
    rng = Rng(seed)
    log = TrainLog()
    for epoch in range(epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            losses, correct = _run_epoch(net, x, y, rng, lr, batch)
        mean_loss = float(np.mean(losses))
        if not np.isfinite(mean_loss):
            raise TrainingError("non-finite loss", epoch)
        log.loss.append(mean_loss)
        log.accuracy.append(float(np.mean(correct)))
        log.lambdas.append(net.lambdas)
    return log


def _run_epoch(net, x, y, rng, lr, batch):
    n = len(y)
    order = rng.permutation(n)
    losses = np.empty(n, dtype=np.float64)
    correct = np.zeros(n, dtype=bool)
    for start in range(0, n, batch):
        idx = order[start : start + batch]
        loss, logits = _train_step(net, x[idx], y[idx], lr)
        losses[idx] = loss
        correct[idx] = np.argmax(logits, axis=1) == y[idx]
    return losses, correct


# --- checkpoint container -------------------------------------------------

MAGIC = b"SNNC1"
VERSION = 1
KIND_ANN = 0
KIND_SNN = 1


class CheckpointError(ValueError):
    pass


def _write_dense(buf, layer: DenseLayer):
    out_n, in_n = layer.weights.shape
    buf.write(struct.pack("<II", out_n, in_n))
    buf.write(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
    buf.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def write_container(net: AnnNetwork, kind=KIND_ANN, extension=b"") -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<HBI", VERSION, kind, len(net.layers)))
    for layer, p in net.layers:
        _write_dense(buf, layer)
        buf.write(struct.pack("<fI", p.lam, p.levels))
    _write_dense(buf, net.output_layer)
    buf.write(struct.pack("<I", len(extension)))
    buf.write(extension)
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return bytes(chunk)

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def dense(self):
        out_n, in_n = self.unpack("<II")
        w = np.frombuffer(self.take(4 * out_n * in_n), dtype="<f4").reshape(out_n, in_n)
        b = np.frombuffer(self.take(4 * out_n), dtype="<f4")
        return DenseLayer(w.astype(TRAIN_DTYPE), b.astype(TRAIN_DTYPE))


def read_container(data: bytes):
    """Parse a checkpoint; returns ``(kind, AnnNetwork, extension_bytes)``."""
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic, not an SNNC1 checkpoint")
    version, kind, n_hidden = r.unpack("<HBI")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    layers = []
    for _ in range(n_hidden):
        dense = r.dense()
        lam, levels = r.unpack("<fI")
        try:
            layers.append((dense, QcfsParams(float(lam), levels)))
        except ValueError as exc:
            raise CheckpointError(str(exc)) from None
    out = r.dense()
    (n_ext,) = r.unpack("<I")
    ext = r.take(n_ext)
    if r.pos != len(r.data):
        raise CheckpointError("trailing bytes after checkpoint")
    try:
        net = AnnNetwork(layers, out)
    except DimensionError as exc:
        raise CheckpointError(str(exc)) from None
    return kind, net, ext


def export_checkpoint(net: AnnNetwork) -> bytes:
    return write_container(net, KIND_ANN)


def import_checkpoint(data: bytes) -> AnnNetwork:
    kind, net, _ = read_container(data)
    if kind != KIND_ANN:
        raise CheckpointError("checkpoint holds a converted SNN, not an ANN")
    return net
