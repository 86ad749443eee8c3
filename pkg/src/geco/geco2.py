"""Greedy training of depth-2 polynomial networks.

Each greedy step linearizes the empirical risk around the current network
``f``: adding ``eta * g`` changes the risk by approximately
``eta * (1/m) sum_i l'(f(x_i), y_i) g(x_i)``.  For ``g(x) = (w . x)^2`` this
is the quadratic form ``w^T M w`` with ``M = (1/m) sum_i l'(f(x_i), y_i) x_i x_i^T``,
so the best new neuron is the dominant eigenvector of ``M``.  After adding
it, every output-layer weight (bias, direct linear term and all neuron
coefficients) is refit by convex minimization.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg

from .linalg import ImplicitSymmetricMatrix, dominant_eigenpair
from .loss import LossFn, get_loss
from .net import BasisFunction, PolyNet

__all__ = [
    "TrainConfig",
    "TraceRecord",
    "TrainTrace",
    "RefitResult",
    "refit_output_weights",
    "geco2_budget",
    "geco2_train",
]

JITTER = 1e-10
# Early-stop threshold on ||l'||_inf and on the greedy score.
STATIONARY_TOL = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    r: int = 100
    k: int = 1
    epsilon: float = 0.1
    eigen_tol: float = 1e-8
    eigen_max_iter: int = 1000
    refit_tol: float = 1e-8
    refit_max_iter: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if min(self.eigen_tol, self.refit_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.eigen_max_iter, self.refit_max_iter) < 1:
            raise ValueError("iteration limits must be >= 1")


class TraceRecord(NamedTuple):
    iteration: int
    risk: float
    eig_abs: float
    seconds: float
    degree: int = 0  # 0 for the initial affine fit


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    with_degree: bool = False

    @property
    def risks(self) -> np.ndarray:
        return np.array([r.risk for r in self.records])

    @property
    def final_risk(self) -> float:
        return self.records[-1].risk

    def is_monotone(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.diff(self.risks) <= tol))

    def columns(self) -> list[str]:
        cols = ["iteration", "risk", "eig_abs", "seconds"]
        return cols + ["degree"] if self.with_degree else cols

    def rows(self):
        for rec in self.records:
            row = [rec.iteration, repr(rec.risk), repr(rec.eig_abs), f"{rec.seconds:.6f}"]
            yield row + [rec.degree] if self.with_degree else row

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns())
            w.writerows(self.rows())

    def to_tikz(self) -> str:
        return " ".join(f"({r.iteration},{r.risk:.6g})" for r in self.records)


class RefitResult(NamedTuple):
    alpha: np.ndarray
    bias: float
    direct_term: np.ndarray
    risk: float
    degraded: bool = False

    def net(self, bases: Sequence[BasisFunction]) -> PolyNet:
        return PolyNet.from_parts(self.bias, self.direct_term, list(self.alpha), bases)


def _design(X: np.ndarray, bases: Sequence[BasisFunction]) -> np.ndarray:
    cols = [np.ones((X.shape[0], 1)), X] + [g(X)[:, None] for g in bases]
    Phi = np.hstack(cols)
    if not np.all(np.isfinite(Phi)):
        raise ValueError("feature evaluations are not finite")
    return Phi


def _solve_normal(G: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``G theta = rhs`` with Tikhonov jitter and two refinement sweeps."""
    p = G.shape[0]
    lam = JITTER * max(np.trace(G) / p, np.finfo(float).tiny)
    degraded = False
    for _ in range(6):
        try:
            factor = scipy.linalg.cho_factor(G + lam * np.eye(p), check_finite=False)
            break
        except np.linalg.LinAlgError:
            lam *= 100.0
            degraded = True
    else:
        theta = np.linalg.lstsq(G, rhs, rcond=None)[0]
        return theta, True
    theta = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    for _ in range(2):
        theta = theta + scipy.linalg.cho_solve(factor, rhs - G @ theta, check_finite=False)
    return theta, degraded


def _mean_risk(loss: LossFn, pred, y) -> float:
    return float(np.mean(loss.value(pred, y)))


def _gradient_descent(Phi, y, loss: LossFn, theta0, tol, max_iter) -> tuple[np.ndarray, bool]:
    """Full-batch gradient descent with Armijo backtracking on the mean loss."""
    m = Phi.shape[0]
    theta = np.array(theta0, dtype=float)
    pred = Phi @ theta
    f = _mean_risk(loss, pred, y)
    step = 1.0
    for _ in range(max_iter):
        grad = Phi.T @ loss.derivative(pred, y) / m
        gnorm2 = grad @ grad
        if math.sqrt(gnorm2) <= tol:
            return theta, False
        step *= 2.0
        while True:
            cand = theta - step * grad
            cand_pred = Phi @ cand
            f_new = _mean_risk(loss, cand_pred, y)
            if f_new <= f - 0.5 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-20:
                return theta, True
        theta, pred, f = cand, cand_pred, f_new
    return theta, True


def _fit(Phi, y, loss: LossFn, tol, max_iter, theta0=None) -> tuple[np.ndarray, bool]:
    if loss.kind == "squared":
        return _solve_normal(Phi.T @ Phi, Phi.T @ y)
    if theta0 is None:
        theta0 = np.zeros(Phi.shape[1])
    return _gradient_descent(Phi, y, loss, theta0, tol, max_iter)


def refit_output_weights(bases: Sequence[BasisFunction], data, loss: LossFn | str,
                         tol: float = 1e-8, max_iter: int = 5000) -> RefitResult:
    """Convex refit of the bias, direct term and neuron coefficients.

    Squared loss is solved exactly through the normal equations of the
    design ``[1, x, g_1(x), ..., g_j(x)]`` (with a small ridge jitter so
    duplicate neurons stay solvable); other losses use gradient descent with
    backtracking until the gradient norm drops below ``tol``.
    """
    loss = get_loss(loss)
    Phi = _design(data.X, bases)
    theta, degraded = _fit(Phi, data.y, loss, tol, max_iter)
    d = data.d
    risk = _mean_risk(loss, Phi @ theta, data.y)
    return RefitResult(theta[1 + d:], float(theta[0]), theta[1:1 + d], risk, degraded)


class _Refitter:
    """Incremental refit over a growing design; keeps ``Phi^T Phi`` up to date."""

    def __init__(self, X, y, loss: LossFn, tol, max_iter, capacity: int):
        self.y = y
        self.loss = loss
        self.tol, self.max_iter = tol, max_iter
        m, d = X.shape
        p_max = 1 + d + capacity
        self.Phi = np.empty((m, p_max))
        self.Phi[:, 0] = 1.0
        self.Phi[:, 1:1 + d] = X
        self.p = 1 + d
        self.theta = None
        self.risk = math.inf
        self.degraded = 0
        if loss.kind == "squared":
            P = self.Phi[:, :self.p]
            self.G = np.zeros((p_max, p_max))
            self.G[:self.p, :self.p] = P.T @ P
            self.rhs = np.zeros(p_max)
            self.rhs[:self.p] = P.T @ y

    def add(self, column: np.ndarray) -> None:
        if not np.all(np.isfinite(column)):
            raise ValueError("feature evaluations are not finite")
        j = self.p
        self.Phi[:, j] = column
        if self.loss.kind == "squared":
            g = self.Phi[:, :j + 1].T @ column
            self.G[j, :j + 1] = g
            self.G[:j + 1, j] = g
            self.rhs[j] = column @ self.y
        self.p += 1

    def solve(self) -> float:
        """Refit; never accept coefficients with higher risk than the previous ones."""
        P = self.Phi[:, :self.p]
        prev = None if self.theta is None else np.append(self.theta, np.zeros(self.p - self.theta.size))
        if self.loss.kind == "squared":
            theta, degraded = _solve_normal(self.G[:self.p, :self.p], self.rhs[:self.p])
        else:
            theta, degraded = _gradient_descent(P, self.y, self.loss,
                                                prev if prev is not None else np.zeros(self.p),
                                                self.tol, self.max_iter)
        risk = _mean_risk(self.loss, P @ theta, self.y)
        if prev is not None and not risk <= self.risk:
            # The previous coefficients with a zero for the new neuron are feasible.
            theta, risk = prev, self.risk
        self.degraded += int(degraded)
        self.theta, self.risk = theta, risk
        return risk

    def predictions(self) -> np.ndarray:
        return self.Phi[:, :self.p] @ self.theta


def _min_iterations(bound: float) -> int:
    """Smallest integer strictly greater than ``bound`` (robust to rounding)."""
    nearest = round(bound)
    if abs(bound - nearest) <= 1e-9 * max(1.0, abs(bound)):
        bound = float(nearest)
    return math.floor(bound) + 1


def geco2_budget(beta: float, k: int, epsilon: float) -> dict:
    """Iteration count ``r > 2 beta k^2 / epsilon`` that guarantees epsilon excess risk."""
    bound = 2.0 * beta * k * k / epsilon
    return {"formula": "2*beta*k^2/epsilon", "bound": bound, "min_r": _min_iterations(bound)}


def _elapsed(t0: float) -> float:
    return time.perf_counter() - t0


def geco2_train(data, loss: LossFn | str, cfg: TrainConfig) -> tuple[PolyNet, TrainTrace]:
    """Train a depth-2 polynomial network with at most ``cfg.r`` hidden neurons.

    Iteration 0 fits the best affine function.  Each following iteration
    adds the neuron ``(w . x)^2`` where ``w`` is the eigenvector of the
    largest-magnitude eigenvalue of ``(1/m) sum_i l'(f(x_i), y_i) x_i x_i^T``
    and then refits every output weight.  The coefficient sign is left to
    the refit, so negative eigenvalues are handled the same way.  Training
    stops early when the loss derivatives or the greedy score vanish.
    """
    loss = get_loss(loss)
    t0 = time.perf_counter()
    X, y = data.X, data.y
    fit = _Refitter(X, y, loss, cfg.refit_tol, cfg.refit_max_iter, cfg.r)
    risk = fit.solve()
    trace = TrainTrace()
    trace.records.append(TraceRecord(0, risk, math.nan, _elapsed(t0)))
    bases: list[BasisFunction] = []
    converged = False
    unconverged_eigen = 0
    for t in range(1, cfg.r + 1):
        c = loss.derivative(fit.predictions(), y)
        if np.max(np.abs(c)) <= STATIONARY_TOL:
            converged = True
            break
        M = ImplicitSymmetricMatrix.weighted_outer(X, c)
        eig = dominant_eigenpair(M, tol=cfg.eigen_tol, max_iter=cfg.eigen_max_iter, seed=(cfg.seed, t))
        if eig.degenerate or abs(eig.value) <= STATIONARY_TOL:
            converged = True
            break
        unconverged_eigen += int(not eig.converged)
        g = BasisFunction.square(eig.vector)
        bases.append(g)
        fit.add(g(X))
        risk = fit.solve()
        trace.records.append(TraceRecord(t, risk, abs(eig.value), _elapsed(t0), 2))

    theta = fit.theta
    d = data.d
    net = PolyNet.from_parts(theta[0], theta[1:1 + d], list(theta[1 + d:]), bases)
    trace.metadata = {
        "algorithm": "geco2",
        "loss": loss.kind,
        "beta": loss.beta,
        "config": asdict(cfg),
        "iteration_budget": geco2_budget(loss.beta, cfg.k, cfg.epsilon),
        "neurons": len(bases),
        "converged_early": converged,
        "unconverged_eigen_steps": unconverged_eigen,
        "degraded_refits": fit.degraded,
        "final_risk": risk,
    }
    return net, trace
