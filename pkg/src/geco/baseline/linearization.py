"""Explicit monomial feature expansion followed by a convex linear fit.

Any depth-t polynomial network is a polynomial of total degree at most
``2^t``, so a linear predictor over all monomials of that degree contains
it.  Exact, but the feature count grows like ``d^degree``; used as the
near-optimality reference for the greedy trainers.
"""
from __future__ import annotations

from itertools import combinations_with_replacement
from math import comb
from typing import NamedTuple

import numpy as np

from ..geco2 import _fit, _mean_risk
from ..loss import get_loss

__all__ = ["MAX_FEATURES", "monomials", "monomial_features", "LinearizationFit", "linearization_train"]

MAX_FEATURES = 2_000_000


def monomials(d: int, degree: int) -> list[tuple[int, ...]]:
    """All monomials of total degree ``<= degree`` in graded lexicographic order.

    A monomial is the sorted tuple of its variable indices, e.g. ``(0, 0, 2)``
    is ``x_1^2 x_3`` and ``()`` is the constant.
    """
    out = []
    for deg in range(degree + 1):
        out.extend(combinations_with_replacement(range(d), deg))
    return out


def n_monomials(d: int, degree: int) -> int:
    return comb(d + degree, degree)


def monomial_features(X, degree: int, max_features: int = MAX_FEATURES) -> tuple[np.ndarray, list]:
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    n = n_monomials(d, degree)
    if n > max_features:
        raise ValueError(f"degree-{degree} expansion of d={d} inputs has {n} features, above the budget of {max_features}")
    keys = monomials(d, degree)
    Phi = np.empty((m, len(keys)))
    # Each monomial extends its prefix by one variable; reuse the prefix column.
    col = {(): 0}
    Phi[:, 0] = 1.0
    for j, key in enumerate(keys[1:], start=1):
        Phi[:, j] = Phi[:, col[key[:-1]]] * X[:, key[-1]]
        col[key] = j
    return Phi, keys


class LinearizationFit(NamedTuple):
    coefficients: dict
    risk: float
    degraded: bool = False

    def predict(self, X) -> np.ndarray:
        degree = max((len(k) for k in self.coefficients), default=0)
        Phi, keys = monomial_features(X, degree)
        return Phi @ np.array([self.coefficients[k] for k in keys])


def linearization_train(data, loss, degree: int, tol: float = 1e-10, max_iter: int = 20000,
                        max_features: int = MAX_FEATURES) -> LinearizationFit:
    """Fit a linear predictor over all monomials of total degree ``<= degree``.

    Squared loss is solved by least squares; other losses by gradient
    descent with backtracking.  Returns the coefficient map keyed by
    monomial index tuples and the achieved empirical risk.
    """
    if degree not in (2, 3):
        raise ValueError("degree must be 2 or 3")
    loss = get_loss(loss)
    Phi, keys = monomial_features(data.X, degree, max_features)
    if loss.kind == "squared":
        theta = np.linalg.lstsq(Phi, data.y, rcond=None)[0]
        degraded = False
    else:
        theta, degraded = _fit(Phi, data.y, loss, tol, max_iter)
    risk = _mean_risk(loss, Phi @ theta, data.y)
    return LinearizationFit(dict(zip(keys, theta.tolist())), risk, degraded)
