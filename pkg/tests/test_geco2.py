import numpy as np
import pytest

from geco.baseline.linearization import linearization_train
from geco.data import Dataset, fixed_square_teacher, gen_teacher_p2k
from geco.geco2 import TrainConfig, geco2_budget, geco2_train, refit_output_weights
from geco.linalg import ImplicitSymmetricMatrix, dominant_eigenpair
from geco.loss import LOGISTIC, SQUARED
from geco.net import BasisFunction


def test_budget_formula():
    b = geco2_budget(1.0, 2, 0.1)
    assert b["bound"] == pytest.approx(80.0)
    assert b["min_r"] == 81
    assert geco2_budget(1.0, 3, 0.05)["min_r"] == 361


def test_first_neuron_recovers_single_square_teacher():
    data, _ = fixed_square_teacher(5, 2000, seed=0)
    net, trace = geco2_train(data, SQUARED, TrainConfig(r=1))
    w = net.bases[0].directions[0]
    assert abs(w[0]) >= 0.99
    # dense oracle: top eigenvector of M built from the residuals of the affine fit
    affine = refit_output_weights([], data, SQUARED)
    c = affine.net([]).predict(data.X) - data.y
    M = data.X.T @ (c[:, None] * data.X) / data.m
    vals, vecs = np.linalg.eigh(M)
    top = vecs[:, np.argmax(np.abs(vals))]
    assert abs(w @ top) >= 1 - 1e-6
    assert trace.records[1].eig_abs == pytest.approx(np.max(np.abs(vals)), rel=1e-6)


def test_zero_targets_stop_early():
    X = np.random.default_rng(0).standard_normal((50, 3))
    net, trace = geco2_train(Dataset(X, np.zeros(50)), SQUARED, TrainConfig(r=10))
    assert trace.final_risk == 0.0
    assert len(net.neurons) == 0
    assert trace.metadata["converged_early"]


def test_refit_recovers_coefficient():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((300, 4))
    e1 = BasisFunction.square(np.eye(4)[0])
    fit = refit_output_weights([e1], Dataset(X, 3 * X[:, 0] ** 2), SQUARED)
    assert fit.alpha[0] == pytest.approx(3.0, abs=1e-6)
    assert fit.bias == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(fit.direct_term, 0.0, atol=1e-6)


def test_refit_constant_targets():
    X = np.random.default_rng(2).standard_normal((40, 3))
    fit = refit_output_weights([], Dataset(X, np.full(40, 2.5)), SQUARED)
    assert fit.bias == pytest.approx(2.5, abs=1e-9)
    assert fit.risk == pytest.approx(0.0, abs=1e-12)


def test_refit_duplicate_neurons():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((200, 3))
    g = BasisFunction.square(rng.standard_normal(3))
    data = Dataset(X, 1.7 * g(X) + 0.3 * X[:, 1] + rng.normal(0, 0.1, 200))
    one = refit_output_weights([g], data, SQUARED)
    two = refit_output_weights([g, g], data, SQUARED)
    assert np.all(np.isfinite(two.alpha))
    assert np.allclose(one.net([g]).predict(X), two.net([g, g]).predict(X), atol=1e-6)


def test_monotone_and_degree2_only():
    data, _ = gen_teacher_p2k(8, 3, 400, seed=4, noise_sd=0.2)
    net, trace = geco2_train(data, SQUARED, TrainConfig(r=25, k=3))
    assert trace.is_monotone(1e-10)
    assert len(net.neurons) <= 25
    assert all(g.degree == 2 for g in net.bases)


def test_logistic_training_decreases_risk():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((300, 4))
    y = np.where(X[:, 0] ** 2 - X[:, 1] ** 2 > 0, 1.0, -1.0)
    net, trace = geco2_train(Dataset(X, y, "binary"), LOGISTIC, TrainConfig(r=5))
    assert trace.is_monotone(1e-10)
    assert trace.final_risk < 0.5 * trace.records[0].risk


def test_matches_quadratic_oracle_on_small_problem():
    data, _ = gen_teacher_p2k(6, 2, 300, seed=6, noise_sd=0.3)
    oracle = linearization_train(data, SQUARED, 2)
    _, trace = geco2_train(data, SQUARED, TrainConfig(r=60, k=2))
    assert trace.final_risk <= oracle.risk + 1e-3


def test_scaling_leaves_direction_unchanged():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((100, 6))
    c = rng.standard_normal(100)
    a = dominant_eigenpair(ImplicitSymmetricMatrix.weighted_outer(X, c))
    b = dominant_eigenpair(ImplicitSymmetricMatrix.weighted_outer(X, 37.5 * c))
    assert abs(a.vector @ b.vector) >= 1 - 1e-8


def test_trace_csv(tmp_path):
    data, _ = gen_teacher_p2k(4, 1, 100, seed=8)
    _, trace = geco2_train(data, SQUARED, TrainConfig(r=3))
    trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,risk,eig_abs,seconds"
    assert trace.metadata["iteration_budget"]["min_r"] >= 1


def test_deterministic():
    data, _ = gen_teacher_p2k(5, 2, 200, seed=9, noise_sd=0.1)
    a = geco2_train(data, SQUARED, TrainConfig(r=10))[1].risks
    b = geco2_train(data, SQUARED, TrainConfig(r=10))[1].risks
    assert np.array_equal(a, b)
