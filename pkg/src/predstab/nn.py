"""Small dense ReLU classifier trained with momentum SGD.

Everything is plain numpy in float64. Parameters live in an immutable
:class:`ModelParams` value: training returns new instances rather than
mutating the caller's model, so snapshots handed to epoch hooks stay valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidState

PROB_FLOOR = 1e-12
SPACES = ("softmax", "logit")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 60
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise InvalidArgument(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise InvalidArgument(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise InvalidArgument(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise InvalidArgument(f"momentum must be in [0, 1), got {self.momentum}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Weights are stored (fan_in, fan_out); arrays are read-only."""

    layer_sizes: tuple
    weights: tuple
    biases: tuple

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]

    def arrays(self):
        """Parameters in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def equals(self, other: "ModelParams") -> bool:
        """Bitwise parameter equality."""
        if self.layer_sizes != other.layer_sizes:
            return False
        return all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.arrays(), other.arrays())
        )


def _freeze(arrays):
    frozen = []
    for a in arrays:
        a = np.array(a, dtype=np.float64)
        a.flags.writeable = False
        frozen.append(a)
    return tuple(frozen)


def make_params(layer_sizes, weights, biases) -> ModelParams:
    return ModelParams(tuple(int(s) for s in layer_sizes), _freeze(weights), _freeze(biases))


def init_model(layer_sizes: Sequence[int], seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases.

    Each weight is drawn from U(-a, a) with a = sqrt(6 / (fan_in + fan_out)),
    using ``numpy.random.default_rng(seed)`` layer by layer in order.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise InvalidArgument(f"need at least input and output sizes, got {sizes}")
    if any(int(s) != s or s < 1 for s in sizes):
        raise InvalidArgument(f"layer sizes must be positive integers, got {sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return make_params(sizes, weights, biases)


def softmax(logits) -> np.ndarray:
    """Row-wise softmax over the last axis, max-shifted for overflow safety."""
    z = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidArgument("softmax input must be finite")
    if z.shape[-1] == 0:
        return z.copy()
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy_loss(probs, label: int) -> float:
    p = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < p.shape[-1]:
        raise InvalidArgument(f"label {label} out of range for {p.shape[-1]} classes")
    return float(-np.log(max(p[label], PROB_FLOOR)))


def _check_features(model: ModelParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, model.input_dim)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise InvalidArgument(
            f"expected features of width {model.input_dim}, got shape {X.shape}"
        )
    return X


def forward(model: ModelParams, X):
    """Return (logits, cache) where cache holds each layer's input and pre-activation."""
    a = X
    cache = []
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        cache.append((a, z))
        a = z if i == last else np.maximum(z, 0.0)
    return a, cache


def loss_and_gradients(model: ModelParams, X, y):
    """Mean cross-entropy over the batch and its gradients, ordered like ``arrays()``.

    The gradient is the unclamped softmax-CE gradient; the probability floor
    only affects the reported loss when a true-class probability is < 1e-12.
    """
    X = _check_features(model, X)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    logits, cache = forward(model, X)
    probs = softmax(logits)
    picked = np.maximum(probs[np.arange(n), y], PROB_FLOOR)
    loss = float(-np.log(picked).mean())

    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * (2 * len(model.weights))
    for i in range(len(model.weights) - 1, -1, -1):
        a_in, _ = cache[i]
        grads[2 * i] = a_in.T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (cache[i - 1][1] > 0)
    return loss, grads


def sgd_epoch(
    model: ModelParams,
    X,
    y,
    cfg: TrainConfig,
    rng: np.random.Generator,
    velocity: Optional[list] = None,
):
    """One shuffled pass of mini-batch momentum SGD.

    Returns ``(new_model, mean_loss)`` where the loss is the per-sample mean
    of each batch's loss taken before that batch's update. ``velocity``, when
    given, is a list of arrays updated in place so momentum carries across
    epochs; otherwise momentum starts from zero.
    """
    X = _check_features(model, X)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise InvalidState("cannot train on an empty labeled set")
    if y.shape != (n,):
        raise InvalidArgument(f"expected {n} labels, got shape {y.shape}")
    if np.any(y < 0) or np.any(y >= model.num_classes):
        raise InvalidArgument("labels out of range for model output size")

    params = [a.copy() for a in model.arrays()]
    if velocity is None:
        velocity = [np.zeros_like(p) for p in params]
    work = make_params(model.layer_sizes, params[0::2], params[1::2])

    order = rng.permutation(n)
    total = 0.0
    for start in range(0, n, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        loss, grads = loss_and_gradients(work, X[idx], y[idx])
        total += loss * len(idx)
        for p, v, g in zip(params, velocity, grads):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
        work = make_params(model.layer_sizes, params[0::2], params[1::2])
    return work, total / n


EpochHook = Callable[[int, ModelParams], None]


def train(
    model: ModelParams,
    X,
    y,
    cfg: TrainConfig,
    epoch_hook: Optional[EpochHook] = None,
    rng: Optional[np.random.Generator] = None,
):
    """Run ``cfg.epochs`` epochs, calling ``epoch_hook(epoch, model)`` after each.

    Epochs are numbered from 1. The shuffle stream defaults to
    ``default_rng(cfg.seed)``. Returns ``(model, per_epoch_losses)``.
    """
    if int(cfg.epochs) < 1:
        raise InvalidArgument(f"epochs must be >= 1, got {cfg.epochs}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    velocity = [np.zeros_like(p) for p in model.arrays()]
    losses = []
    for epoch in range(1, cfg.epochs + 1):
        model, loss = sgd_epoch(model, X, y, cfg, rng, velocity)
        losses.append(loss)
        if epoch_hook is not None:
            epoch_hook(epoch, model)
    return model, losses


def predict_pool(model: ModelParams, X, space: str = "softmax") -> np.ndarray:
    """Prediction matrix (n, C) in softmax or logit space."""
    if space not in SPACES:
        raise InvalidArgument(f"space must be one of {SPACES}, got {space!r}")
    X = _check_features(model, X)
    if X.shape[0] == 0:
        return np.zeros((0, model.num_classes))
    logits, _ = forward(model, X)
    return softmax(logits) if space == "softmax" else logits


def evaluate_accuracy(model: ModelParams, X, y) -> float:
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise InvalidArgument("cannot evaluate on an empty test set")
    logits, _ = forward(model, _check_features(model, X))
    # np.argmax returns the first maximum, i.e. the lowest class index on ties.
    return float(np.mean(np.argmax(logits, axis=1) == y))


def mean_loss(model: ModelParams, X, y) -> float:
    loss, _ = loss_and_gradients(model, X, y)
    return loss
