"""Matrix-free dominant eigenpair and top singular pair solvers.

Both greedy trainers only ever need the single dominant direction of a
symmetric ``d x d`` matrix that is available as a black-box product
``v -> M v``.  The solver below is power iteration on ``M^2`` accelerated
with a locally optimal Rayleigh-Ritz step (search space ``{x, residual, x - x_prev}``),
followed by a two-dimensional Ritz split that picks the sign.  It costs two
mat-vecs per iteration and does not stall when ``+lambda`` and ``-lambda``
are close in magnitude, where plain power iteration oscillates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NumericalFailure",
    "ImplicitSymmetricMatrix",
    "EigenResult",
    "SingularResult",
    "dominant_eigenpair",
    "top_singular_pair",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000

# Refresh M @ x from scratch every so often; the Ritz update recombines
# stored products and accumulates rounding otherwise.
_REFRESH_EVERY = 25


class NumericalFailure(ArithmeticError):
    """Raised when a computation produces non-finite values."""


@dataclass(frozen=True)
class ImplicitSymmetricMatrix:
    """A symmetric operator known only through its action ``v -> M v``."""

    apply: Callable[[np.ndarray], np.ndarray]
    dim: int

    @classmethod
    def weighted_outer(cls, X: np.ndarray, c: np.ndarray) -> "ImplicitSymmetricMatrix":
        """``M = (1/m) sum_i c_i x_i x_i^T`` without forming ``M``."""
        X = np.asarray(X, dtype=float)
        c = np.asarray(c, dtype=float)
        m = X.shape[0]
        if c.shape != (m,):
            raise ValueError(f"weights have shape {c.shape}, expected ({m},)")

        def apply(v):
            return X.T @ (c * (X @ v)) / m

        return cls(apply, X.shape[1])

    @classmethod
    def from_dense(cls, A: np.ndarray) -> "ImplicitSymmetricMatrix":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        return cls(lambda v: A @ v, A.shape[0])


@dataclass(frozen=True)
class EigenResult:
    vector: np.ndarray
    value: float
    residual: float
    iterations: int
    converged: bool = True
    degenerate: bool = False


@dataclass(frozen=True)
class SingularResult:
    u: np.ndarray
    v: np.ndarray
    sigma: float
    tau_effective: float
    iterations: int
    converged: bool = True
    degenerate: bool = False


def _checked(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise NumericalFailure("matrix-vector product returned non-finite values")
    return y


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _ritz_basis(S: np.ndarray, MS: np.ndarray):
    """Orthonormalize the columns of ``S`` (dropping dependent ones)."""
    G = S.T @ S
    evals, evecs = np.linalg.eigh(G)
    keep = evals > 1e-12 * evals.max()
    T = evecs[:, keep] / np.sqrt(evals[keep])
    return T, S @ T, MS @ T


def dominant_eigenpair(
    M: ImplicitSymmetricMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> EigenResult:
    """Eigenpair of the eigenvalue with the largest absolute value.

    Parameters
    ----------
    M : ImplicitSymmetricMatrix
    tol : float
        Convergence is declared once ``||M v - lambda v|| <= tol * scale``
        where ``scale`` is the largest ``||M x||`` seen (an estimate of
        ``||M||_2``).
    max_iter : int
    seed : int
        Seed for the random start vector.

    Returns
    -------
    EigenResult
        ``value`` is the signed Rayleigh quotient.  ``converged`` is False
        when ``max_iter`` was exhausted; ``degenerate`` marks the zero matrix.
    """
    if M.dim < 1:
        raise ValueError("dimension must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    dim = M.dim

    def apply(v):
        return _checked(M.apply(v))

    x = _random_unit(rng, dim)
    Mx = apply(x)
    scale = np.linalg.norm(Mx)
    if scale == 0.0:
        # One more probe before declaring M = 0.
        x = _random_unit(rng, dim)
        Mx = apply(x)
        scale = np.linalg.norm(Mx)
        if scale == 0.0:
            return EigenResult(x, 0.0, 0.0, 0, converged=True, degenerate=True)
    if abs(x @ Mx) <= 1e-14 * scale:
        x = _random_unit(rng, dim)
        Mx = apply(x)
        scale = max(scale, np.linalg.norm(Mx))
    if dim == 1:
        rho = float(x @ Mx)
        return EigenResult(x, rho, 0.0, 1, converged=True, degenerate=rho == 0.0)

    # Ritz iteration on B = M^2, whose top eigenspace holds the eigenvectors
    # of both +|lambda_max| and -|lambda_max|.
    Bx = apply(Mx)
    p = Mp = Bp = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if it % _REFRESH_EVERY == 0:
            Mx = apply(x)
            Bx = apply(Mx)
        scale = max(scale, np.linalg.norm(Mx))
        rho = x @ Mx
        if np.linalg.norm(Mx - rho * x) <= tol * scale:
            converged = True
            break
        mu = x @ Bx
        rB = Bx - mu * x
        resB = np.linalg.norm(rB)
        if resB <= 0.1 * tol * scale**2:
            # x has settled in the top eigenspace of M^2 but mixes the
            # eigenvectors of +lambda and -lambda; split them.
            S = np.column_stack([x, Mx])
            T, Q, MQ = _ritz_basis(S, np.column_stack([Mx, Bx]))
            H = Q.T @ MQ
            theta, C = np.linalg.eigh(0.5 * (H + H.T))
            x = S @ (T @ C[:, int(np.argmax(np.abs(theta)))])
            x = x / np.linalg.norm(x)
            Mx = apply(x)
            Bx = apply(Mx)
            p = Mp = Bp = None
            continue
        r = rB / resB
        Mr = apply(r)
        Br = apply(Mr)
        if p is None:
            S = np.column_stack([x, r])
            MS = np.column_stack([Mx, Mr])
            BS = np.column_stack([Bx, Br])
        else:
            S = np.column_stack([x, r, p])
            MS = np.column_stack([Mx, Mr, Mp])
            BS = np.column_stack([Bx, Br, Bp])
        T, Q, BQ = _ritz_basis(S, BS)
        H = Q.T @ BQ
        theta, C = np.linalg.eigh(0.5 * (H + H.T))
        y = T @ C[:, -1]
        x_new, Mx_new, Bx_new = S @ y, MS @ y, BS @ y
        p, Mp, Bp = S[:, 1:] @ y[1:], MS[:, 1:] @ y[1:], BS[:, 1:] @ y[1:]
        pn = np.linalg.norm(p)
        if pn > 0:
            p, Mp, Bp = p / pn, Mp / pn, Bp / pn
        else:
            p = Mp = Bp = None
        nrm = np.linalg.norm(x_new)
        x, Mx, Bx = x_new / nrm, Mx_new / nrm, Bx_new / nrm

    x = x / np.linalg.norm(x)
    Mx = apply(x)
    rho = float(x @ Mx)
    res = float(np.linalg.norm(Mx - rho * x))
    return EigenResult(x, rho, res, it, converged=converged)


def top_singular_pair(
    matvec: Callable[[np.ndarray], np.ndarray],
    rmatvec: Callable[[np.ndarray], np.ndarray],
    shape: tuple[int, int],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = 0,
) -> SingularResult:
    """Leading singular triple of ``A`` given ``v -> A v`` and ``u -> A^T u``.

    Runs the eigensolver on ``A^T A`` and sets ``u = A v / ||A v||`` so that
    ``u^T A v = sigma >= 0``.  ``tau_effective`` is the a-posteriori relative
    gap ``1 - sigma / sqrt(theta + residual)`` implied by the eigen residual.
    """
    n_rows, n_cols = shape
    gram = ImplicitSymmetricMatrix(lambda v: rmatvec(matvec(v)), n_cols)
    eig = dominant_eigenpair(gram, tol=tol, max_iter=max_iter, seed=seed)
    v = eig.vector
    Av = _checked(matvec(v))
    sigma = float(np.linalg.norm(Av))
    if eig.degenerate or sigma == 0.0:
        u = np.zeros(n_rows)
        u[0] = 1.0
        return SingularResult(u, v, 0.0, 0.0, eig.iterations, True, degenerate=True)
    u = Av / sigma
    upper = np.sqrt(max(eig.value, 0.0) + eig.residual)
    tau_eff = float(max(0.0, 1.0 - sigma / upper)) if upper > 0 else 0.0
    return SingularResult(u, v, sigma, tau_eff, eig.iterations, eig.converged)
