"""Polynomial approximation of the sigmoid and the resulting size bounds.

A sigmoid network whose units see pre-activations bounded by ``L`` can be
replaced, up to ``epsilon`` in sup norm, by a squared-activation network:
each sigmoid becomes a polynomial ``p`` of degree ``T`` and each polynomial
becomes a :func:`~geco.gadgets.polynomial_gadget`.  All logarithms in the
degree and size formulas are base 2.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as C

from . import gadgets

__all__ = [
    "sigmoid_degree",
    "degree_bound",
    "SigmoidApprox",
    "fit_sigmoid_poly",
    "sigmoid",
    "horner",
    "BoundReport",
    "sigmoid_net_bounds",
    "CompressionReport",
    "compress_sigmoid_net",
]

GRID_POINTS = 10_000
_LN2 = math.log(2.0)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def horner(coeffs, x):
    """Evaluate ``sum_j coeffs[j] x^j``."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def _check_domain(epsilon: float, L: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    if not L >= 3:
        raise ValueError(f"L must be >= 3, got {L}")


def _log2_degree(t: int, L: float, epsilon: float) -> float:
    """``log(2L^4 + exp(7L ln((4L)^t/eps + 3))) + 2 log(8 (4L)^(t-1) / eps)``, base 2.

    The first logarithm is evaluated as a log-sum-exp so large ``L t`` cannot overflow.
    """
    ln_inner = math.log(math.exp(t * math.log(4 * L) - math.log(epsilon)) + 3.0)
    first = np.logaddexp(math.log(2.0) + 4 * math.log(L), 7 * L * ln_inner) / _LN2
    second = 2.0 * (3.0 + (t - 1) * math.log2(4 * L) - math.log2(epsilon))
    return float(first + second)


def sigmoid_degree(epsilon: float, L: float) -> int:
    """Degree ``T`` sufficient for a polynomial to approximate the sigmoid to ``epsilon`` on ``|x| <= 4L``."""
    _check_domain(epsilon, L)
    return math.ceil(_log2_degree(1, L, epsilon))


def degree_bound(t: int, L: float, epsilon: float) -> float:
    """Unrounded degree with the ``(4L)^t`` inflation used for depth-``t`` networks."""
    _check_domain(epsilon, L)
    if t < 1:
        raise ValueError("t must be >= 1")
    return _log2_degree(t, L, epsilon)


@dataclass(frozen=True)
class SigmoidApprox:
    """``p(x) = sum_j coefficients[j] x^j`` with ``|p - sigmoid| <= epsilon`` on ``|x| <= 4L``."""

    coefficients: tuple
    L: float
    epsilon: float
    degree: int
    sup_error: float

    @property
    def half_width(self) -> float:
        return 4.0 * self.L

    def __call__(self, x):
        return horner(self.coefficients, x)

    def to_json(self) -> str:
        return json.dumps({"L": self.L, "epsilon": self.epsilon, "degree": self.degree,
                           "coefficients": list(self.coefficients), "sup_error": self.sup_error})


def _to_monomials(cheb: np.ndarray, scale: float) -> list[float]:
    """Monomial coefficients of ``x -> sum_n cheb[n] T_n(x / scale)``.

    Uses exact recurrences in extended precision; the alternating monomial
    coefficients of high-degree Chebyshev polynomials cancel badly in doubles.
    """
    n = len(cheb)
    with mpmath.workdps(60):
        out = [mpmath.mpf(0)] * n
        prev, cur = [mpmath.mpf(1)], [mpmath.mpf(0), mpmath.mpf(1)]
        for k, ck in enumerate(cheb):
            basis = prev if k == 0 else cur
            if k >= 2:
                nxt = [mpmath.mpf(0)] * (k + 1)
                for j, a in enumerate(cur):
                    nxt[j + 1] += 2 * a
                for j, a in enumerate(prev):
                    nxt[j] -= a
                prev, cur = cur, nxt
                basis = cur
            for j, a in enumerate(basis):
                out[j] += mpmath.mpf(float(ck)) * a
        s = mpmath.mpf(scale)
        return [float(out[j] / s ** j) for j in range(n)]


def fit_sigmoid_poly(epsilon: float, L: float, degree_override: int | None = None) -> SigmoidApprox:
    """Polynomial within ``epsilon`` of the sigmoid on ``|x| <= 4L``.

    Interpolates ``x -> sigmoid(4 L x)`` at Chebyshev points of degree
    ``max(T, degree_override)``, drops trailing terms while the error on a
    10^4-point grid stays within ``epsilon``, then converts to the monomial
    basis.  The final word is a Horner evaluation of the monomial form on
    the grid; if that fails the degree is raised one step at a time.
    """
    _check_domain(epsilon, L)
    full = max(sigmoid_degree(epsilon, L), degree_override or 0)
    half = 4.0 * L
    t = np.linspace(-1.0, 1.0, GRID_POINTS)
    target = sigmoid(half * t)
    cheb = C.chebinterpolate(lambda s: sigmoid(half * s), full)

    n = full
    while n > 0 and np.max(np.abs(C.chebval(t, cheb[:n]) - target)) <= epsilon:
        n -= 1
    x = half * t
    for deg in range(n, full + 1):
        coeffs = _to_monomials(cheb[:deg + 1], half)
        err = float(np.max(np.abs(horner(coeffs, x) - target)))
        if err <= epsilon:
            return SigmoidApprox(tuple(coeffs), float(L), float(epsilon), deg, err)
    raise ArithmeticError(f"no polynomial up to degree {full} met epsilon={epsilon} on the grid "
                          f"(last sup error {err:.3g})")


@dataclass(frozen=True)
class BoundReport:
    """Degree and size bounds for a depth-``t`` sigmoid network.

    ``T``, ``B_t`` and ``B_n`` are the ceilings of the closed forms; ``B_t``
    and ``B_n`` are evaluated at the integer ``T``.
    """

    t: int
    L: float
    epsilon: float
    T: int
    B_t: int
    B_n: int
    T_raw: float
    B_t_raw: float
    B_n_raw: float
    asymptotic_B_t: float

    def to_dict(self) -> dict:
        return asdict(self)


def sigmoid_net_bounds(t: int, L: float, epsilon: float) -> BoundReport:
    """``B_t = 1 + log T + log log T`` and ``B_n = 1 + 2T(2 log T + log T log log T)``.

    ``asymptotic_B_t`` is ``log(t L + L log(1/epsilon))``, the order stated
    for ``B_t`` up to polylog factors, reported for comparison.
    """
    raw = degree_bound(t, L, epsilon)
    T = math.ceil(raw)
    lt = math.log2(T)
    llt = math.log2(lt)
    b_t = 1.0 + lt + llt
    b_n = 1.0 + 2.0 * T * (2.0 * lt + lt * llt)
    asym = math.log2(t * L + L * math.log2(1.0 / epsilon))
    return BoundReport(t, float(L), float(epsilon), T, math.ceil(b_t), math.ceil(b_n), raw, b_t, b_n, asym)


@dataclass(frozen=True)
class CompressionReport:
    sup_gap: float
    epsilon: float
    passed: bool
    poly_degree: int
    depth: int
    size: int
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def compress_sigmoid_net(V, c, w, b: float = 0.0, L: float = 3.0, epsilon: float = 0.1,
                         n_points: int = GRID_POINTS, seed: int = 0,
                         max_neurons: int = 100_000) -> tuple[gadgets.GadgetNet, CompressionReport]:
    """Replace ``f(x) = b + sum_j w_j sigmoid(V_j . x + c_j)`` by a squared-activation network.

    Requires ``||V_j||_1 + |c_j| <= L`` so pre-activations stay in ``[-L, L]``
    for ``||x||_inf < 1``.  Each sigmoid is swapped for a polynomial accurate
    to ``epsilon / max(1, ||w||_1)``; the gap is then measured on
    ``n_points`` uniform random inputs in the open unit cube.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    n, d = V.shape
    if c.shape != (n,) or w.shape != (n,):
        raise ValueError("V, c and w disagree on the number of hidden units")
    if n > 5 or d > 5:
        raise ValueError(f"only networks with at most 5 units and 5 inputs are supported, got n={n}, d={d}")
    norms = np.abs(V).sum(axis=1) + np.abs(c)
    if np.any(norms > L + 1e-12):
        raise ValueError(f"unit weight norms {norms.max():.4g} exceed L={L}")

    approx = fit_sigmoid_poly(epsilon / max(1.0, float(np.abs(w).sum())), L)
    a = np.array(approx.coefficients)
    if not np.any(a[1:]):
        unit = gadgets.compose_affine(gadgets.identity_gadget(), np.zeros((1, d)), [0.0])
        units = [gadgets.combine_outputs(unit, [0.0], a[0]) for _ in range(n)]
    else:
        poly = gadgets.polynomial_gadget(a[1:], a[0])
        units = [gadgets.compose_affine(poly, V[j][None, :], [c[j]]) for j in range(n)]
    depth = max(u.depth for u in units)
    size = sum(gadgets.pad_to_depth(u, depth).size for u in units)
    if size > max_neurons:
        raise ValueError(f"compressed network needs {size} neurons, above the budget of {max_neurons}")
    g = gadgets.combine_outputs(gadgets.parallel(units), w, b)

    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, (n_points, d))
    f = b + sigmoid(X @ V.T + c) @ w
    gap = float(np.max(np.abs(gadgets.evaluate_gadget(g, X)[:, 0] - f)))
    return g, CompressionReport(gap, float(epsilon), gap <= epsilon, approx.degree, g.depth, g.size, n_points)
