"""Dense feed-forward network with softmax cross-entropy and weight decay.

All parameters live in one flat float64 vector.  Layer ``l`` occupies a
``(fan_in, fan_out)`` weight block in row-major order followed by its
``fan_out`` biases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    activation: str = "relu"
    weight_decay: float = 1e-4

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"need at least input and output sizes, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if sizes[-1] < 2:
            raise ValueError("output layer needs at least 2 classes")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if not self.weight_decay >= 0:
            raise ValueError("weight_decay must be nonnegative")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def n_params(self) -> int:
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


@dataclass
class LossAndGrad:
    """Result of one forward-backward pass.

    ``loss`` is the per-example mean cross-entropy plus ``(lambda/2)*||w||^2``
    and ``grad`` is its exact gradient.  ``data_loss_sum`` keeps the summed
    cross-entropy so the batch-summed form is still available.
    """

    loss: float
    grad: np.ndarray
    data_loss_sum: float
    n_examples: int
    decay_term: float

    @property
    def summed_loss(self) -> float:
        return self.data_loss_sum + self.decay_term


def unpack(w: np.ndarray, spec: NetworkSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of ``w`` as ``[(W_1, b_1), ...]``; writes go through to ``w``."""
    if w.shape != (spec.n_params,):
        raise ValueError(f"parameter vector has shape {w.shape}, expected ({spec.n_params},)")
    layers = []
    off = 0
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        W = w[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = w[off:off + fan_out]
        off += fan_out
        layers.append((W, b))
    return layers


def init_network(spec: NetworkSpec, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    w = np.zeros(spec.n_params, dtype=np.float64)
    for W, _ in unpack(w, spec):
        fan_in, fan_out = W.shape
        a = math.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-a, a, size=W.shape)
    return w


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z, a, kind):
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    return 1.0 - a * a


def _check_inputs(X, y, spec):
    if X.ndim != 2 or X.shape[1] != spec.n_inputs:
        raise ValueError(f"features have shape {X.shape}, expected (n, {spec.n_inputs})")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must be a vector matching the feature rows")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if y.min() < 0 or y.max() >= spec.n_classes:
        raise ValueError(f"labels must lie in [0, {spec.n_classes})")


def logits(w: np.ndarray, X: np.ndarray, spec: NetworkSpec) -> np.ndarray:
    a = X
    layers = unpack(w, spec)
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        a = z if i == len(layers) - 1 else _activate(z, spec.activation)
    return a


def data_terms(w: np.ndarray, X: np.ndarray, y: np.ndarray,
               spec: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-example cross-entropy and the gradient of their *sum*.

    No weight decay and no normalization; this is the piece a worker
    computes on its shard.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_inputs(X, y, spec)
    layers = unpack(w, spec)
    n = X.shape[0]
    rows = np.arange(n)

    inputs = [X]
    pre = []
    a = X
    for i, (W, b) in enumerate(layers):
        z = a @ W + b
        pre.append(z)
        if i < len(layers) - 1:
            a = _activate(z, spec.activation)
            inputs.append(a)
    out = pre[-1]
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite activations in forward pass")

    shifted = out - out.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    ce = lse - shifted[rows, y]

    delta = np.exp(shifted - lse[:, None])
    delta[rows, y] -= 1.0

    grad = np.empty_like(w)
    for i in range(len(layers) - 1, -1, -1):
        gW, gb = unpack(grad, spec)[i]
        gW[...] = inputs[i].T @ delta
        gb[...] = delta.sum(axis=0)
        if i > 0:
            back = delta @ layers[i][0].T
            delta = back * _activation_grad(pre[i - 1], inputs[i], spec.activation)
    return ce, grad


def finalize(w: np.ndarray, ce: np.ndarray, grad_sum: np.ndarray,
             weight_decay: float) -> LossAndGrad:
    """Normalize summed data terms by batch size and add weight decay once."""
    n = ce.shape[0]
    total = math.fsum(ce.tolist())
    decay = 0.5 * weight_decay * float(np.dot(w, w))
    loss = total / n + decay
    grad = grad_sum / n + weight_decay * w
    if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
        raise DivergenceError(f"non-finite loss or gradient (loss={loss})")
    return LossAndGrad(loss=loss, grad=grad, data_loss_sum=total,
                       n_examples=n, decay_term=decay)


def forward_backward(w: np.ndarray, batch, spec: NetworkSpec) -> LossAndGrad:
    """Loss and exact gradient on ``batch`` (anything with ``features`` and
    ``labels``, or an ``(X, y)`` pair)."""
    X, y = _xy(batch)
    ce, g = data_terms(w, X, y, spec)
    return finalize(w, ce, g, spec.weight_decay)


def loss_only(w: np.ndarray, batch, spec: NetworkSpec) -> float:
    return forward_backward(w, batch, spec).loss


def evaluate(w: np.ndarray, X: np.ndarray, y: np.ndarray, spec: NetworkSpec,
             chunk: int = 10000) -> tuple[float, float]:
    """Return ``(mean cross-entropy, accuracy)`` on a dataset, no weight decay."""
    ce_total = 0.0
    correct = 0
    for start in range(0, len(y), chunk):
        out = logits(w, X[start:start + chunk], spec)
        yy = y[start:start + chunk]
        shifted = out - out.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        ce_total += float((lse - shifted[np.arange(len(yy)), yy]).sum())
        correct += int((out.argmax(axis=1) == yy).sum())
    return ce_total / len(y), correct / len(y)


def _xy(batch) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(batch, "features"):
        return batch.features, batch.labels
    X, y = batch
    return X, y

