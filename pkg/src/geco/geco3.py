"""Greedy training over products of up to three linear forms.

The greedy step now has to maximize the trilinear score

    F(w, u, v) = (1/m) sum_i c_i (w . x_i)(u . x_i)(v . x_i)

over unit vectors, which is hard in general.  :func:`approx_tensor_max`
fixes ``w`` to random unit directions; for each one the remaining bilinear
problem ``max u^T A v`` with ``A = (1/m) sum_i c_i (w . x_i) x_i x_i^T`` is a
top singular pair.  With ``s = ceil(2 d ln(1/delta))`` restarts the best
triple is within ``(1 - tau) / sqrt(2 d)`` of the optimum with probability
at least ``1 - delta``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .geco2 import (STATIONARY_TOL, TraceRecord, TrainConfig, TrainTrace, _min_iterations,
                    _Refitter)
from .linalg import ImplicitSymmetricMatrix, dominant_eigenpair, top_singular_pair
from .loss import LossFn, get_loss
from .net import BasisFunction, PolyNet

__all__ = ["TensorConfig", "TensorResult", "trilinear_score", "approx_tensor_max",
           "grid_tensor_max", "tensor_ratio_experiment", "geco3_budget", "geco3_train"]


@dataclass(frozen=True)
class TensorConfig:
    tau: float = 0.5
    delta: float = 0.1
    restarts_override: int | None = None
    seed: int = 0
    log_base: float = math.e
    inner_tol: float = 1e-8
    inner_max_iter: int = 1000

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.restarts_override is not None and self.restarts_override < 1:
            raise ValueError("restarts_override must be >= 1")

    def restarts(self, d: int) -> int:
        if self.restarts_override is not None:
            return self.restarts_override
        return max(1, math.ceil(2 * d * math.log(1.0 / self.delta, self.log_base)))


@dataclass(frozen=True)
class TensorResult:
    w: np.ndarray
    u: np.ndarray
    v: np.ndarray
    score: float
    restart_index: int
    restarts: int
    max_tau_effective: float = 0.0
    degenerate: bool = False


def trilinear_score(X, c, w, u, v) -> float:
    X = np.asarray(X, dtype=float)
    return float(np.mean(c * (X @ w) * (X @ u) * (X @ v)))


def approx_tensor_max(X, c, cfg: TensorConfig = TensorConfig()) -> TensorResult:
    """Randomized approximate maximizer of ``F(w, u, v)`` over unit vectors.

    Restart ``t`` draws its direction from a generator seeded with
    ``(cfg.seed, t)``, so the result does not depend on evaluation order.
    Ties between restarts go to the lowest index.
    """
    X = np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float)
    m, d = X.shape
    if m < 1 or d < 1:
        raise ValueError("need at least one example and one feature")
    if c.shape != (m,):
        raise ValueError(f"weights have shape {c.shape}, expected ({m},)")
    s = cfg.restarts(d)
    if not np.any(c):
        e = np.zeros(d)
        e[0] = 1.0
        return TensorResult(e, e, e, 0.0, 0, s, degenerate=True)

    best = None
    best_score = -math.inf
    max_tau = 0.0
    for t in range(s):
        rng = np.random.default_rng((cfg.seed, t))
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        weights = c * (X @ w) / m

        def A(v, weights=weights):
            return X.T @ (weights * (X @ v))

        # A is symmetric, so it serves as its own transpose.
        sv = top_singular_pair(A, A, (d, d), tol=cfg.inner_tol, max_iter=cfg.inner_max_iter,
                               seed=(cfg.seed, t, 1))
        max_tau = max(max_tau, sv.tau_effective)
        score = trilinear_score(X, c, w, sv.u, sv.v)
        if score > best_score:
            best_score = score
            best = (w, sv.u, sv.v, t)
    w, u, v, t = best
    return TensorResult(w, u, v, best_score, t, s, max_tau)


def _sphere_grid(d: int, step_deg: float) -> np.ndarray:
    """Unit vectors on an angular grid, one per antipodal pair (``F`` is odd in ``w``)."""
    a = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    if d == 2:
        return np.column_stack([np.cos(a), np.sin(a)])
    if d == 3:
        polar = np.deg2rad(np.arange(0.0, 180.0 + step_deg / 2, step_deg))
        az = np.deg2rad(np.arange(0.0, 360.0, step_deg))
        P, A = np.meshgrid(polar, az, indexing="ij")
        return np.column_stack([(np.sin(P) * np.cos(A)).ravel(), (np.sin(P) * np.sin(A)).ravel(),
                                np.cos(P).ravel()])
    raise ValueError("grid search is only implemented for d in {2, 3}")


def grid_tensor_max(X, c, step_deg: float = 1.0) -> float:
    """Near-exact ``max F`` over unit vectors for ``d <= 3``.

    ``w`` ranges over an angular grid; for each ``w`` the inner maximum
    over ``u, v`` is the exact largest singular value of ``A_w``.
    """
    X = np.asarray(X, dtype=float)
    c = np.asarray(c, dtype=float)
    m, d = X.shape
    G = _sphere_grid(d, step_deg)
    T = np.einsum("i,ia,ib,ic->abc", c, X, X, X) / m
    A = np.einsum("abc,na->nbc", T, G)
    return float(np.max(np.linalg.svd(A, compute_uv=False)[:, 0]))


def tensor_ratio_experiment(d: int = 2, tau: float = 0.5, delta: float = 0.1, trials: int = 200,
                            m: int = 50, seed: int = 0, step_deg: float = 1.0) -> dict:
    """Fraction of trials where the randomized maximizer is within ``(1 - tau)/sqrt(2d)`` of the grid optimum.

    Trial ``i`` draws Gaussian data and weights from ``(seed, i)``.
    """
    ratio = (1.0 - tau) / math.sqrt(2 * d)
    rows = []
    for i in range(trials):
        rng = np.random.default_rng((seed, i))
        X = rng.standard_normal((m, d))
        c = rng.standard_normal(m)
        res = approx_tensor_max(X, c, TensorConfig(tau=tau, delta=delta, seed=i))
        opt = grid_tensor_max(X, c, step_deg)
        rows.append({"trial": i, "score": res.score, "grid_max": opt,
                     "ratio": res.score / opt if opt > 0 else 1.0, "success": res.score >= ratio * opt})
    return {"d": d, "tau": tau, "delta": delta, "m": m, "trials": trials, "seed": seed,
            "required_ratio": ratio, "restarts": TensorConfig(tau=tau, delta=delta).restarts(d),
            "success_fraction": float(np.mean([r["success"] for r in rows])),
            "min_ratio": float(min(r["ratio"] for r in rows)), "rows": rows}


def geco3_budget(d: int, beta: float, k: int, epsilon: float, tau: float) -> dict:
    """``r > 4 d beta k^2 / (epsilon (1 - tau)^2)``."""
    bound = 4.0 * d * beta * k * k / (epsilon * (1.0 - tau) ** 2)
    return {"formula": "4*d*beta*k^2/(epsilon*(1-tau)^2)", "bound": bound, "min_r": _min_iterations(bound)}


def _candidates(X, c, cfg: TrainConfig, tcfg: TensorConfig, t: int):
    """Best basis function of each degree under the first-order criterion."""
    m = X.shape[0]
    out = []
    mean = X.T @ c / m
    norm = float(np.linalg.norm(mean))
    if norm > 0:
        out.append((norm, BasisFunction.from_vectors(mean)))
    eig = dominant_eigenpair(ImplicitSymmetricMatrix.weighted_outer(X, c), tol=cfg.eigen_tol,
                             max_iter=cfg.eigen_max_iter, seed=(cfg.seed, t))
    if not eig.degenerate:
        out.append((abs(eig.value), BasisFunction.square(eig.vector)))
    step_seed = int(np.random.SeedSequence([tcfg.seed, t]).generate_state(1)[0])
    step_cfg = replace(tcfg, seed=step_seed)
    tens = approx_tensor_max(X, c, step_cfg)
    if not tens.degenerate:
        out.append((abs(tens.score), BasisFunction.from_vectors(tens.w, tens.u, tens.v)))
    return out


def geco3_train(data, loss: LossFn | str, cfg: TrainConfig,
                tcfg: TensorConfig = TensorConfig()) -> tuple[PolyNet, TrainTrace]:
    """Greedy training over neurons of degree 1, 2 and 3.

    Every step scores the best degree-1 direction (normalized mean of
    ``l'_i x_i``), the best degree-2 neuron (dominant eigenvector) and an
    approximately best degree-3 neuron, adds whichever has the largest
    absolute score and refits all output weights.
    """
    loss = get_loss(loss)
    t0 = time.perf_counter()
    X, y = data.X, data.y
    fit = _Refitter(X, y, loss, cfg.refit_tol, cfg.refit_max_iter, cfg.r)
    risk = fit.solve()
    trace = TrainTrace(with_degree=True)
    trace.records.append(TraceRecord(0, risk, math.nan, time.perf_counter() - t0))
    bases: list[BasisFunction] = []
    converged = False
    for t in range(1, cfg.r + 1):
        c = loss.derivative(fit.predictions(), y)
        if np.max(np.abs(c)) <= STATIONARY_TOL:
            converged = True
            break
        cands = _candidates(X, c, cfg, tcfg, t)
        if not cands:
            converged = True
            break
        scores = [s for s, _ in cands]
        j = int(np.argmax(scores))
        if scores[j] <= STATIONARY_TOL:
            converged = True
            break
        g = cands[j][1]
        bases.append(g)
        fit.add(g(X))
        risk = fit.solve()
        trace.records.append(TraceRecord(t, risk, scores[j], time.perf_counter() - t0, g.degree))

    theta = fit.theta
    d = data.d
    net = PolyNet.from_parts(theta[0], theta[1:1 + d], list(theta[1 + d:]), bases)
    degrees = [g.degree for g in bases]
    trace.metadata = {
        "algorithm": "geco3",
        "loss": loss.kind,
        "beta": loss.beta,
        "config": asdict(cfg),
        "tensor_config": asdict(tcfg),
        "restarts_per_step": tcfg.restarts(d),
        "iteration_budget": geco3_budget(d, loss.beta, cfg.k, cfg.epsilon, tcfg.tau),
        "neurons": len(bases),
        "neurons_by_degree": {str(k): degrees.count(k) for k in (1, 2, 3)},
        "converged_early": converged,
        "degraded_refits": fit.degraded,
        "final_risk": risk,
    }
    return net, trace
