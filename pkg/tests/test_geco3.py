import math

import numpy as np
import pytest

from geco.data import gen_teacher_p2k
from geco.gadgets import evaluate_gadget, polynet_to_gadget
from geco.geco2 import TrainConfig, geco2_train
from geco.geco3 import (TensorConfig, approx_tensor_max, geco3_budget, geco3_train, grid_tensor_max,
                        tensor_ratio_experiment, trilinear_score)
from geco.loss import SQUARED


def brute_force_max(X, c, step_deg):
    """Grid over all three unit vectors in the plane."""
    a = np.deg2rad(np.arange(0, 360, step_deg))
    U = np.column_stack([np.cos(a), np.sin(a)])
    P = X @ U.T  # (m, n)
    F = np.einsum("i,ia,ib,ic->abc", c / len(c), P, P, P)
    return F.max()


def test_rank_one_data():
    d = 4
    X = np.eye(d)[:1]
    res = approx_tensor_max(X, np.ones(1), TensorConfig())
    assert res.score >= 0.5 / math.sqrt(2 * d)
    assert res.score <= 1.0 + 1e-12


def test_zero_weights_degenerate():
    res = approx_tensor_max(np.ones((5, 3)), np.zeros(5))
    assert res.degenerate and res.score == 0.0


def test_result_invariants():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 5))
    c = rng.standard_normal(60)
    res = approx_tensor_max(X, c, TensorConfig(seed=3))
    for v in (res.w, res.u, res.v):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
    assert trilinear_score(X, c, res.w, res.u, res.v) == pytest.approx(res.score, abs=1e-10)
    again = approx_tensor_max(X, c, TensorConfig(seed=3))
    assert again.score == res.score and again.restart_index == res.restart_index


def test_trilinear():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    c = rng.standard_normal(30)
    w, u, v = rng.standard_normal((3, 4))
    for gamma in rng.uniform(-3, 3, 5):
        assert trilinear_score(X, c, gamma * w, u, v) == pytest.approx(gamma * trilinear_score(X, c, w, u, v), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("d,delta", [(2, 0.1), (10, 0.1), (7, 0.01), (3, 0.5)])
def test_restart_count(d, delta):
    assert TensorConfig(delta=delta).restarts(d) == math.ceil(2 * d * math.log(1 / delta))
    assert TensorConfig(delta=delta, restarts_override=3).restarts(d) == 3


def test_config_validation():
    for kw in ({"tau": 0.0}, {"tau": 1.0}, {"delta": 1.5}, {"restarts_override": 0}):
        with pytest.raises(ValueError):
            TensorConfig(**kw)


def test_budget_formula():
    b = geco3_budget(10, 1.0, 2, 0.1, 0.5)
    assert b["bound"] == pytest.approx(6400.0)
    assert b["min_r"] == 6401


def test_grid_oracle_agrees_with_full_brute_force():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 2))
    c = rng.standard_normal(20)
    fine = grid_tensor_max(X, c, 1.0)
    coarse = brute_force_max(X, c, 3.0)
    assert coarse <= fine + 1e-12
    assert fine <= coarse * 1.01


@pytest.mark.parametrize("d,step", [(2, 1.0), (3, 2.0)])
def test_approximation_ratio(d, step):
    rep = tensor_ratio_experiment(d=d, tau=0.5, delta=0.1, trials=200, m=50, seed=d, step_deg=step)
    assert rep["success_fraction"] >= 1 - 0.1 - 0.05


def test_gadget_expansion_of_trained_net():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((500, 4))
    from geco.data import Dataset
    data = Dataset(X, X[:, 0] * X[:, 1] * X[:, 2] + 0.5 * X[:, 3] ** 2)
    net, trace = geco3_train(data, SQUARED, TrainConfig(r=6), TensorConfig(seed=1))
    assert trace.is_monotone(1e-10)
    g = polynet_to_gadget(net)
    Xt = rng.uniform(-1, 1, (200, 4))
    assert np.max(np.abs(evaluate_gadget(g, Xt)[:, 0] - net.predict(Xt))) <= 1e-9
    degrees = net.degrees()
    assert g.size <= 6 * degrees.count(3) + 3 * degrees.count(2) + 4 * degrees.count(1) + 4


def test_trace_has_degree_column():
    data, _ = gen_teacher_p2k(4, 1, 100, seed=4)
    _, trace = geco3_train(data, SQUARED, TrainConfig(r=3))
    assert trace.columns()[-1] == "degree"
    assert trace.metadata["restarts_per_step"] == TensorConfig().restarts(4)


def test_close_to_geco2_on_depth2_data():
    data, _ = gen_teacher_p2k(6, 2, 500, seed=5)
    _, t2 = geco2_train(data, SQUARED, TrainConfig(r=30, k=2))
    _, t3 = geco3_train(data, SQUARED, TrainConfig(r=30, k=2))
    assert t3.final_risk <= t2.final_risk + 0.05
