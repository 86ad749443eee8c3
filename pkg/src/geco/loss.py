"""Smooth convex scalar losses and the empirical risk built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LossFn", "SQUARED", "LOGISTIC", "get_loss", "empirical_risk", "risk_gradient_weights"]

# Beyond this margin exp(-|z|) < 7e-16 and the asymptotic branches are exact
# to double precision.
_LOGISTIC_CUTOFF = 35.0


@dataclass(frozen=True)
class LossFn:
    """A loss ``l(p, y)`` with its derivative in ``p`` and smoothness constant."""

    kind: str
    beta: float

    def value(self, p, y):
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "squared":
            return 0.5 * (p - y) ** 2
        z = y * p
        with np.errstate(over="ignore"):
            mid = np.log1p(np.exp(-np.clip(z, -_LOGISTIC_CUTOFF, None)))
            tail = np.exp(-np.clip(z, _LOGISTIC_CUTOFF, None))
        return np.where(z > _LOGISTIC_CUTOFF, tail, np.where(z < -_LOGISTIC_CUTOFF, -z, mid))

    def derivative(self, p, y):
        p = np.asarray(p, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "squared":
            return p - y
        z = y * p
        # d/dp log(1 + e^{-yp}) = -y / (1 + e^{yp})
        sig = np.where(z < -_LOGISTIC_CUTOFF, 1.0,
                       1.0 / (1.0 + np.exp(np.clip(z, None, 700.0))))
        return -y * sig


SQUARED = LossFn("squared", 1.0)
LOGISTIC = LossFn("logistic", 0.25)


def get_loss(name: str | LossFn) -> LossFn:
    if isinstance(name, LossFn):
        return name
    try:
        return {"squared": SQUARED, "logistic": LOGISTIC}[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected 'squared' or 'logistic'") from None


def _predictions(net, data):
    if data.m == 0:
        raise ValueError("empty dataset")
    return net.predict(data.X)


def empirical_risk(net, data, loss: LossFn | str) -> float:
    """Mean loss ``(1/m) sum_i l(f(x_i), y_i)`` of ``net`` on ``data``."""
    loss = get_loss(loss)
    return float(np.mean(loss.value(_predictions(net, data), data.y)))


def risk_gradient_weights(net, data, loss: LossFn | str) -> np.ndarray:
    """Per-example derivatives ``l'(f(x_i), y_i)``."""
    loss = get_loss(loss)
    return loss.derivative(_predictions(net, data), data.y)
