"""Depth classifiers: binary soft-margin linear SVM and a multi-class MLP.

Both trainers are deterministic under a fixed seed and dependency-free
(numpy only). Trained models are immutable in spirit: nothing here mutates
a model after its trainer returns it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainSpec:
    """Shared training knobs for both classifier families."""

    slack_weight: float = 1.0
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.slack_weight <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("slack weight, batch size and learning rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass(frozen=True)
class LinearSvm:
    """Hyperplane classifier: class 0 on the non-negative side of w.x + b."""

    weights: np.ndarray
    offset: float
    depth: int
    objective_history: tuple = ()


def _svm_objective(X, y, slack, w, b):
    margins = y * (X @ w + b)
    return 0.5 * float(w @ w) + slack * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def train_svm(samples, labels, spec: TrainSpec) -> LinearSvm:
    """Minimize 0.5*||w||^2 + slack * sum(hinge) by seeded subgradient descent.

    Steps decay as 1/(slack*t); the returned model is the best iterate seen
    at epoch checkpoints, so the recorded objective history is non-increasing
    and the final objective never exceeds the initial one.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("degenerate training set: both classes must be present")
    if classes.size > 2 or not set(classes.tolist()) <= {0, 1}:
        raise ValueError("binary SVM expects labels in {0, 1}")
    n, depth = X.shape
    # class 0 maps to +1 so that w.x + b >= 0 predicts class 0
    y = np.where(labels == 0, 1.0, -1.0)

    slack = spec.slack_weight
    rng = np.random.default_rng(spec.seed)
    w = np.zeros(depth)
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = _svm_objective(X, y, slack, w, b)
    history = [best_obj]

    t = 0
    for _ in range(spec.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = perm[start:start + spec.batch_size]
            t += 1
            step = 1.0 / (slack * t)
            Xb, yb = X[idx], y[idx]
            violated = yb * (Xb @ w + b) < 1.0
            scale = slack * n / idx.size
            grad_w = w - scale * (yb[violated] @ Xb[violated])
            grad_b = -scale * float(np.sum(yb[violated]))
            w = w - step * grad_w
            b = b - step * grad_b
        obj = _svm_objective(X, y, slack, w, b)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
        history.append(best_obj)

    return LinearSvm(weights=best_w, offset=best_b, depth=depth,
                     objective_history=tuple(history))


def svm_decision(svm: LinearSvm, x):
    """Signed decision value w.x + b for a single vector or a batch."""
    x = np.asarray(x, dtype=float)
    return x @ svm.weights + svm.offset


def svm_predict(svm: LinearSvm, x):
    """Class 0 where the decision value is >= 0 (boundary ties to class 0)."""
    value = svm_decision(svm, x)
    if np.ndim(value) == 0:
        return 0 if value >= 0.0 else 1
    return np.where(value >= 0.0, 0, 1)


@dataclass(frozen=True)
class Mlp:
    """Feed-forward rectifier network with a softmax output layer."""

    weights: tuple
    biases: tuple
    epoch_losses: tuple = ()

    @property
    def layer_sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def num_classes(self) -> int:
        return int(self.weights[-1].shape[1])


def init_mlp(layer_sizes, seed: int = 0) -> Mlp:
    """He-style initialization scaled by layer fan-in; biases start at zero."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return Mlp(weights=tuple(weights), biases=tuple(biases))


def softmax(logits):
    logits = np.asarray(logits, dtype=float)
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def _forward(mlp: Mlp, X):
    activations = [X]
    h = X
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        activations.append(h)
    return activations


def mlp_posterior(mlp: Mlp, x):
    """Softmax class posterior for one input (D,) or a batch (n, D)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    logits = _forward(mlp, np.atleast_2d(x))[-1]
    post = softmax(logits)
    return post[0] if single else post


def mlp_predict(mlp: Mlp, x):
    post = mlp_posterior(mlp, x)
    return int(np.argmax(post)) if post.ndim == 1 else np.argmax(post, axis=-1)


def cross_entropy_loss(mlp: Mlp, X, labels) -> float:
    post = mlp_posterior(mlp, X)
    picked = np.clip(post[np.arange(len(labels)), labels], 1e-300, None)
    return float(-np.mean(np.log(picked)))


def loss_and_gradients(mlp: Mlp, X, labels):
    """Mean softmax cross-entropy on a batch plus gradients for every parameter."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    n = X.shape[0]
    activations = _forward(mlp, X)
    post = softmax(activations[-1])
    picked = np.clip(post[np.arange(n), labels], 1e-300, None)
    loss = float(-np.mean(np.log(picked)))

    delta = post.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads_w, grads_b = [], []
    for i in range(len(mlp.weights) - 1, -1, -1):
        grads_w.append(activations[i].T @ delta)
        grads_b.append(np.sum(delta, axis=0))
        if i > 0:
            delta = (delta @ mlp.weights[i].T) * (activations[i] > 0.0)
    grads_w.reverse()
    grads_b.reverse()
    return loss, grads_w, grads_b


def train_mlp(samples, labels, spec: TrainSpec, hidden=(256, 128, 64, 32),
              num_classes: int | None = None) -> Mlp:
    """Seeded mini-batch SGD on softmax cross-entropy.

    Records the full-training-set loss after each epoch (epoch_losses), which
    is what the loss-versus-epoch reports consume. Zero epochs returns the
    freshly initialized network untouched.
    """
    X = np.asarray(samples, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty (n, D) array")
    if X.shape[0] != labels.shape[0]:
        raise ValueError("sample/label count mismatch")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    layer_sizes = (X.shape[1],) + tuple(hidden) + (num_classes,)

    model = init_mlp(layer_sizes, seed=spec.seed)
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    rng = np.random.default_rng(spec.seed + 1)

    n = X.shape[0]
    losses = []
    for _ in range(spec.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, spec.batch_size):
            idx = perm[start:start + spec.batch_size]
            current = Mlp(weights=tuple(weights), biases=tuple(biases))
            _, gw, gb = loss_and_gradients(current, X[idx], labels[idx])
            for li in range(len(weights)):
                weights[li] -= spec.learning_rate * gw[li]
                biases[li] -= spec.learning_rate * gb[li]
        epoch_model = Mlp(weights=tuple(weights), biases=tuple(biases))
        losses.append(cross_entropy_loss(epoch_model, X, labels))

    return Mlp(weights=tuple(weights), biases=tuple(biases), epoch_losses=tuple(losses))


def save_model(model, path):
    """Versioned npz serialization; round-trips bit-exactly."""
    if isinstance(model, LinearSvm):
        np.savez(
            path, kind="svm", version=MODEL_FORMAT_VERSION,
            weights=model.weights, offset=model.offset, depth=model.depth,
            objective_history=np.asarray(model.objective_history),
        )
    elif isinstance(model, Mlp):
        arrays = {f"w{i}": w for i, w in enumerate(model.weights)}
        arrays.update({f"b{i}": b for i, b in enumerate(model.biases)})
        np.savez(
            path, kind="mlp", version=MODEL_FORMAT_VERSION,
            num_layers=len(model.weights),
            epoch_losses=np.asarray(model.epoch_losses), **arrays,
        )
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")


def load_model(path):
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        kind = str(data["kind"])
        if kind == "svm":
            return LinearSvm(
                weights=data["weights"], offset=float(data["offset"]),
                depth=int(data["depth"]),
                objective_history=tuple(data["objective_history"].tolist()),
            )
        if kind == "mlp":
            n = int(data["num_layers"])
            return Mlp(
                weights=tuple(data[f"w{i}"] for i in range(n)),
                biases=tuple(data[f"b{i}"] for i in range(n)),
                epoch_losses=tuple(data["epoch_losses"].tolist()),
            )
        raise ValueError(f"unknown model kind {kind!r}")
