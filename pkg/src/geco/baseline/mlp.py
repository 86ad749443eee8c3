"""Fully connected scalar-output networks trained by mini-batch SGD.

Used as the backprop baseline for GECO and as the random teacher in the
over-specification experiments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ..linalg import NumericalFailure
from ..loss import LossFn, get_loss

__all__ = ["ACTIVATIONS", "MlpNet", "SgdConfig", "ErrorTrace", "sgd_train", "error_of"]


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0).astype(float)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS = {
    "squared": (np.square, lambda z: 2.0 * z),
    "relu": (_relu, _relu_grad),
    "sigmoid": (_sigmoid, lambda z: _sigmoid(z) * (1.0 - _sigmoid(z))),
    "identity": (lambda z: z, np.ones_like),
}


@dataclass(frozen=True)
class MlpNet:
    """Layers ``W_l, b_l``; hidden layers use ``activations[l]``, the output is linear."""

    weights: tuple
    biases: tuple
    activations: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or len(self.activations) != len(self.weights) - 1:
            raise ValueError("need one bias per layer and one activation per hidden layer")
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ValueError(f"bias shape {b.shape} does not match weight shape {W.shape}")
        for W_prev, W in zip(self.weights, self.weights[1:]):
            if W.shape[1] != W_prev.shape[0]:
                raise ValueError(f"layer shapes {W_prev.shape} and {W.shape} do not chain")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have a single unit")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")

    @classmethod
    def init(cls, sizes, activation: str, rng, init_scale: float = 1.0) -> "MlpNet":
        """Gaussian weights with standard deviation ``init_scale / sqrt(fan_in)``, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(init_scale * rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        return cls(tuple(weights), tuple(biases), (activation,) * (len(sizes) - 2))

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def with_params(self, params) -> "MlpNet":
        n = len(self.weights)
        return replace(self, weights=tuple(params[:n]), biases=tuple(params[n:]))

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.sizes[0]:
            raise ValueError(f"expected inputs of shape (m, {self.sizes[0]}), got {X.shape}")
        h = X
        for W, b, act in zip(self.weights, self.biases, self.activations):
            h = ACTIVATIONS[act][0](h @ W.T + b)
        return (h @ self.weights[-1].T + self.biases[-1])[:, 0]

    predict = forward

    def loss_and_grad(self, X, y, loss: LossFn | str):
        """Mean loss over the batch and its gradient for every parameter."""
        loss = get_loss(loss)
        pre, acts = [], [np.asarray(X, dtype=float)]
        h = acts[0]
        for W, b, act in zip(self.weights, self.biases, self.activations):
            z = h @ W.T + b
            pre.append(z)
            h = ACTIVATIONS[act][0](z)
            acts.append(h)
        out = (h @ self.weights[-1].T + self.biases[-1])[:, 0]
        n = out.shape[0]
        value = float(np.mean(loss.value(out, y)))
        delta = (loss.derivative(out, y) / n)[:, None]
        gW = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            gW[layer] = delta.T @ acts[layer]
            gb[layer] = delta.sum(axis=0)
            if layer > 0:
                back = delta @ self.weights[layer]
                delta = back * ACTIVATIONS[self.activations[layer - 1]][1](pre[layer - 1])
        return value, gW + gb

    def to_dict(self) -> dict:
        return {
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activations": list(self.activations),
        }

    @classmethod
    def from_dict(cls, obj) -> "MlpNet":
        return cls(tuple(np.asarray(W, dtype=float) for W in obj["weights"]),
                   tuple(np.asarray(b, dtype=float) for b in obj["biases"]),
                   tuple(obj["activations"]))


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 0.01
    decay: float = 0.0  # lr_t = lr / (1 + decay * t)
    batch_size: int = 32
    momentum: float = 0.9  # Nesterov
    iterations: int = 1000
    eval_every: int = 100
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.iterations < 0 or self.eval_every < 1:
            raise ValueError("iterations must be >= 0 and eval_every >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class ErrorTrace:
    """``(iteration, error)`` pairs; ``metric`` names what the error is."""

    metric: str
    points: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "error"])
            w.writerows((it, repr(float(e))) for it, e in self.points)

    def to_tikz(self) -> str:
        return " ".join(f"({it},{e:.4f})" for it, e in self.points)


def error_of(net, data, loss) -> tuple[str, float]:
    """Classification error for +-1 labels, mean loss otherwise."""
    out = net.predict(data.X)
    if data.kind == "binary":
        return "classification_error", float(np.mean(np.where(out >= 0, 1.0, -1.0) != data.y))
    return "mean_loss", float(np.mean(get_loss(loss).value(out, data.y)))


def sgd_train(net: MlpNet, data, loss, cfg: SgdConfig, test=None) -> tuple[MlpNet, ErrorTrace]:
    """Mini-batch SGD with Nesterov momentum.

    Batches are drawn by reshuffling the data each epoch.  The trace is
    evaluated on ``test`` (default: the training data) every
    ``cfg.eval_every`` iterations.
    """
    loss = get_loss(loss)
    test = data if test is None else test
    metric = "classification_error" if test.kind == "binary" else "mean_loss"
    trace = ErrorTrace(metric)
    if cfg.iterations == 0:
        return net, trace

    rng = np.random.default_rng(cfg.seed)
    params = [p.copy() for p in net.params]
    velocity = [np.zeros_like(p) for p in params]
    batch = min(cfg.batch_size, data.m)
    order = rng.permutation(data.m)
    pos = 0
    for it in range(1, cfg.iterations + 1):
        if pos + batch > data.m:
            order = rng.permutation(data.m)
            pos = 0
        idx = order[pos:pos + batch]
        pos += batch
        lr = cfg.lr / (1.0 + cfg.decay * (it - 1))
        lookahead = [p + cfg.momentum * v for p, v in zip(params, velocity)]
        with np.errstate(over="ignore", invalid="ignore"):
            value, grads = net.with_params(lookahead).loss_and_grad(data.X[idx], data.y[idx], loss)
        if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
            raise NumericalFailure(f"SGD diverged at iteration {it} (batch loss {value}); try a smaller lr")
        for p, v, g in zip(params, velocity, grads):
            v *= cfg.momentum
            v -= lr * g
            p += v
        if it % cfg.eval_every == 0 or it == cfg.iterations:
            _, err = error_of(net.with_params(params), test, loss)
            if not np.isfinite(err):
                raise NumericalFailure(f"SGD diverged at iteration {it} (test error {err})")
            trace.points.append((it, err))
    return net.with_params(params), trace
