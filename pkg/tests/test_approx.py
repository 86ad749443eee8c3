import json
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geco.approx import (compress_sigmoid_net, fit_sigmoid_poly, horner, sigmoid_degree, sigmoid,
                         sigmoid_net_bounds)

# log2(2L^4 + exp(7L ln(4L/eps + 3))) + 2 log2(8/eps), evaluated at 50 digits
DEGREE_REFERENCE = {0.5: 107.852637545433, 0.2: 136.166734583273, 0.1: 158.436660801899}


def mp_degree(t, L, eps):
    with mp.workdps(50):
        L, eps = mp.mpf(L), mp.mpf(eps)
        return (mp.log(2 * L ** 4 + mp.exp(7 * L * mp.log((4 * L) ** t / eps + 3)), 2)
                + 2 * mp.log(8 * (4 * L) ** (t - 1) / eps, 2))


@pytest.mark.parametrize("eps,raw", sorted(DEGREE_REFERENCE.items()))
def test_sigmoid_degree_frozen(eps, raw):
    assert sigmoid_degree(eps, 3) == math.ceil(raw)
    assert float(mp_degree(1, 3, eps)) == pytest.approx(raw, abs=1e-9)


def test_sigmoid_degree_domain():
    for eps, L in ((0.0, 3), (1.0, 3), (0.5, 2.5)):
        with pytest.raises(ValueError):
            sigmoid_degree(eps, L)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 0.99), st.floats(0.001, 0.99), st.floats(3, 40))
def test_degree_monotone_in_inverse_eps(e1, e2, L):
    lo, hi = sorted((e1, e2))
    assert sigmoid_degree(lo, L) >= sigmoid_degree(hi, L)
    assert sigmoid_net_bounds(2, L, lo).B_n >= sigmoid_net_bounds(2, L, hi).B_n


@settings(max_examples=50, deadline=None)
@given(st.floats(0.001, 0.99), st.floats(3, 40), st.integers(1, 4))
def test_degree_matches_high_precision(eps, L, t):
    assert sigmoid_net_bounds(t, L, eps).T_raw == pytest.approx(float(mp_degree(t, L, eps)), rel=1e-12)


def test_size_bounds_frozen():
    rep = sigmoid_net_bounds(2, 3, 0.5)
    assert rep.T_raw == pytest.approx(187.052307202516, abs=1e-9)
    assert rep.T == 188
    # closed forms at the integer T, base-2 logs
    assert rep.B_t_raw == pytest.approx(11.4719420924699, abs=1e-9)
    assert rep.B_n_raw == pytest.approx(13968.8668217165, abs=1e-6)
    assert (rep.B_t, rep.B_n) == (12, 13969)


def test_size_bounds_base_case():
    rep = sigmoid_net_bounds(1, 3, 0.5)
    assert rep.T == sigmoid_degree(0.5, 3)


def test_sigmoid_symmetry_identity():
    x = np.linspace(-20, 20, 1001)
    assert np.max(np.abs(sigmoid(x) + sigmoid(-x) - 1)) == 0.0


@pytest.mark.parametrize("eps", [0.5, 0.2, 0.1, 0.05])
def test_fit_meets_grid_bound(eps):
    p = fit_sigmoid_poly(eps, 3)
    x = np.linspace(-12, 12, 10_000)
    assert np.max(np.abs(horner(p.coefficients, x) - 1 / (1 + np.exp(-x)))) <= eps
    assert abs(p(0.0) - 0.5) <= eps
    assert p.degree <= sigmoid_degree(eps, 3)


def test_fit_json():
    obj = json.loads(fit_sigmoid_poly(0.2, 3).to_json())
    assert {"L", "epsilon", "degree", "coefficients"} <= set(obj)
    assert len(obj["coefficients"]) == obj["degree"] + 1


def test_compress_single_neuron():
    _, rep = compress_sigmoid_net([[1.0, 0.5]], [0.3], [1.0], L=3, epsilon=0.2)
    assert rep.sup_gap <= 0.2


def test_compress_zero_weight_neuron():
    g, rep = compress_sigmoid_net([[0.0, 0.0]], [0.0], [1.0], L=3, epsilon=0.2)
    p = fit_sigmoid_poly(0.2, 3)
    assert rep.sup_gap == pytest.approx(abs(p(0.0) - 0.5), abs=1e-12)
    assert rep.sup_gap <= 0.2


def test_compress_two_neurons():
    _, rep = compress_sigmoid_net([[1.0, -1.0, 0.5], [0.5, 0.5, -1.0]], [0.3, -0.2], [1.5, -1.5],
                                  b=0.1, L=3, epsilon=0.1)
    assert rep.passed and rep.sup_gap <= 0.1


def test_compress_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(5):
        n, d = rng.integers(1, 6, 2)
        V = rng.uniform(-1, 1, (n, d))
        c = rng.uniform(-1, 1, n)
        scale = 3.0 / (np.abs(V).sum(axis=1) + np.abs(c))
        _, rep = compress_sigmoid_net(V * scale[:, None], c * scale, rng.uniform(-1, 1, n), L=3, epsilon=0.1)
        assert rep.sup_gap <= 0.1


def test_compress_rejects_large_weights_and_budget():
    with pytest.raises(ValueError, match="exceed"):
        compress_sigmoid_net([[3.0, 1.0]], [0.0], [1.0], L=3, epsilon=0.1)
    with pytest.raises(ValueError, match="budget"):
        compress_sigmoid_net([[1.0]], [0.0], [1.0], L=3, epsilon=0.1, max_neurons=5)
