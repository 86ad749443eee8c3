"""Over-specification experiments.

With the hidden layer fixed at random weights ``V``, fitting the output
layer is a convex least-squares problem on the features ``Z = sigma(V X)``.
Once there are at least as many hidden units as examples and ``Z`` has full
rank, any target is interpolated exactly.  The sweep checks the practical
counterpart: wider students trained by SGD reach a given error sooner.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..data import gen_teacher_mlp, split
from .mlp import ACTIVATIONS, ErrorTrace, MlpNet, SgdConfig, sgd_train

__all__ = ["OverspecReport", "overspec_experiment", "SweepResult", "overspec_sweep",
           "iterations_to_threshold", "RANK_RTOL"]

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class OverspecReport:
    d: int
    m: int
    n_hidden: int
    activation: str
    seed: int
    rank: int
    risk: float
    rank_deficient: bool

    def to_dict(self) -> dict:
        return asdict(self)


def overspec_experiment(d: int, m: int, n_hidden: int, activation: str = "sigmoid",
                        seed: int = 0, targets=None) -> OverspecReport:
    """Fit random targets with a fixed random hidden layer.

    ``V`` has i.i.d. ``N(0, 1/d)`` entries and inputs are standard Gaussian.
    Targets default to i.i.d. standard Gaussian.  The rank counts singular
    values of ``Z`` above ``RANK_RTOL`` times the largest; the risk is the
    mean of ``0.5 (W Z - y)^2`` at the least-squares solution.
    """
    if d < 1 or m < 1 or n_hidden < 1:
        raise ValueError("d, m and n_hidden must be >= 1")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, m))
    V = rng.standard_normal((n_hidden, d)) / np.sqrt(d)
    y = rng.standard_normal(m) if targets is None else np.asarray(targets, dtype=float)
    if y.shape != (m,):
        raise ValueError(f"targets have shape {y.shape}, expected ({m},)")
    Z = ACTIVATIONS[activation][0](V @ X)
    s = np.linalg.svd(Z, compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
    W = np.linalg.lstsq(Z.T, y, rcond=None)[0]
    risk = float(np.mean(0.5 * (Z.T @ W - y) ** 2))
    return OverspecReport(d, m, n_hidden, activation, seed, rank, risk, rank < m)


def iterations_to_threshold(trace: ErrorTrace, threshold: float) -> float:
    """First traced iteration with error ``<= threshold``; ``inf`` if never reached."""
    for it, err in trace.points:
        if err <= threshold:
            return float(it)
    return float("inf")


@dataclass
class SweepResult:
    factors: list
    traces: dict  # (factor, seed) -> ErrorTrace
    threshold: float
    iterations: dict  # (factor, seed) -> iterations to threshold
    metadata: dict

    def median_iterations(self) -> dict:
        seeds = sorted({s for _, s in self.traces})
        return {f: float(np.median([self.iterations[f, s] for s in seeds])) for f in self.factors}

    def is_monotone(self) -> bool:
        med = [self.median_iterations()[f] for f in self.factors]
        return all(b <= a for a, b in zip(med, med[1:]))

    def mean_trace(self, factor) -> list:
        seeds = sorted({s for f, s in self.traces if f == factor})
        pts = [self.traces[factor, s].points for s in seeds]
        return [(pts[0][i][0], float(np.mean([p[i][1] for p in pts]))) for i in range(len(pts[0]))]


def overspec_sweep(d: int = 150, teacher_width: int = 60, factors=(1, 2, 4, 8), m: int = 10_000,
                   seeds=(0,), activation: str = "relu", student_activation: str = "relu",
                   loss: str = "squared", cfg: SgdConfig = SgdConfig(), binary: bool = True,
                   test_fraction: float = 0.2, threshold_factor: float = 1.5,
                   eval_on: str = "train") -> SweepResult:
    """Train students of width ``teacher_width * factor`` on data from a random teacher.

    Each seed draws its own teacher and data set; students for every factor
    share them.  The threshold for iterations-to-threshold is
    ``threshold_factor`` times the largest-factor students' mean final
    error.  ``eval_on`` picks whether traces track the training split
    (optimization speed, the default) or the held-out split.
    """
    if eval_on not in ("train", "test"):
        raise ValueError("eval_on must be 'train' or 'test'")
    factors = list(factors)
    traces, iters = {}, {}
    for seed in seeds:
        data, _ = gen_teacher_mlp(d, teacher_width, activation, m, seed=seed, binary=binary)
        train, test = split(data, 1.0 - test_fraction, seed=seed)
        for f in factors:
            rng = np.random.default_rng((seed, f))
            student = MlpNet.init([d, teacher_width * f, 1], student_activation, rng, cfg.init_scale)
            _, trace = sgd_train(student, train, loss, replace(cfg, seed=cfg.seed + seed),
                                 train if eval_on == "train" else test)
            traces[f, seed] = trace
    final = np.mean([traces[factors[-1], s].points[-1][1] for s in seeds])
    threshold = float(threshold_factor * final)
    for key, trace in traces.items():
        iters[key] = iterations_to_threshold(trace, threshold)
    meta = {"d": d, "teacher_width": teacher_width, "factors": factors, "m": m, "seeds": list(seeds),
            "activation": activation, "student_activation": student_activation, "loss": loss,
            "binary": binary, "eval_on": eval_on, "sgd": asdict(cfg), "threshold": threshold,
            "student_widths": {str(f): teacher_width * f for f in factors}}
    return SweepResult(factors, traces, threshold, iters, meta)
