import json

import numpy as np
import pytest

from geco.cli import main
from geco.data import gen_teacher_p2k, save_csv


@pytest.fixture
def train_csv(tmp_path):
    ds, _ = gen_teacher_p2k(5, 2, 200, seed=1)
    path = tmp_path / "train.csv"
    save_csv(ds, path)
    return path


def read_trace(path):
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    return [r[:3] for r in rows]  # drop wall-clock


def test_train_geco2_writes_outputs(tmp_path, train_csv):
    out = tmp_path / "run"
    assert main(["train", "geco2", "--data", str(train_csv), "--out", str(out), "--r", "10", "--k", "2"]) == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["r"] == 10 and meta["config"]["k"] == 2
    assert meta["iteration_budget"]["min_r"] == 81
    assert (out / "trace.csv").read_text().startswith("iteration,risk,eig_abs,seconds")
    assert "neurons" in json.loads((out / "model.json").read_text())


def test_rerun_from_metadata_is_identical(tmp_path, train_csv):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["train", "geco3", "--data", str(train_csv), "--out", str(a), "--r", "4", "--seed", "7"])
    main(["train", "geco3", "--data", str(train_csv), "--out", str(b), "--config", str(a / "metadata.json")])
    assert read_trace(a / "trace.csv") == read_trace(b / "trace.csv")


def test_flags_override_config(tmp_path, train_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"r": 3, "epsilon": 0.2}))
    out = tmp_path / "o"
    main(["train", "geco2", "--data", str(train_csv), "--out", str(out), "--config", str(cfg), "--r", "5"])
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["r"] == 5 and meta["config"]["epsilon"] == 0.2


def test_emit_tikz(tmp_path, train_csv):
    out = tmp_path / "t"
    main(["train", "geco2", "--data", str(train_csv), "--out", str(out), "--r", "3", "--emit", "tikz-coords"])
    assert (out / "trace.tikz").read_text().startswith("(0,")


def test_sgd_zero_iterations(tmp_path, train_csv):
    out = tmp_path / "s"
    assert main(["train", "sgd", "--data", str(train_csv), "--out", str(out), "--iterations", "0"]) == 0
    assert (out / "trace.csv").read_text().splitlines() == ["iteration,mean_loss"]


def test_sgd_divergence_exit_1(tmp_path, train_csv, capsys):
    code = main(["train", "sgd", "--data", str(train_csv), "--out", str(tmp_path), "--lr", "5"])
    assert code == 1
    assert "numerical failure" in capsys.readouterr().err


def test_missing_data_exit_2(tmp_path, capsys):
    missing = tmp_path / "nowhere.csv"
    assert main(["train", "geco2", "--data", str(missing), "--out", str(tmp_path)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_flag_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "geco9"])
    assert exc.value.code == 2


def test_eval(tmp_path, train_csv, capsys):
    out = tmp_path / "m"
    main(["train", "geco2", "--data", str(train_csv), "--out", str(out), "--r", "20"])
    capsys.readouterr()
    assert main(["eval", "--model", str(out / "model.json"), "--data", str(train_csv), "--out", str(out)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["risk"] <= 1e-10


def test_experiment_overspec(tmp_path):
    assert main(["experiment", "overspec", "--out", str(tmp_path), "--trials", "2"]) == 0
    rep = json.loads((tmp_path / "overspec.json").read_text())
    assert all(t["rank"] == 30 and t["risk"] <= 1e-8 for t in rep["trials"])


def test_experiment_tensor_ratio(tmp_path):
    assert main(["experiment", "tensor-ratio", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "tensor_ratio.json").read_text())["success_fraction"] >= 0.85


def test_experiment_sigmoid(tmp_path):
    assert main(["experiment", "sigmoid-approx", "--out", str(tmp_path), "--epsilon", "0.1", "--L", "3"]) == 0
    assert json.loads((tmp_path / "sigmoid_approx.json").read_text())["sup_error"] <= 0.1


def test_experiment_sweep_small(tmp_path):
    assert main(["experiment", "overspec-sweep", "--out", str(tmp_path), "--d", "8", "--m", "200",
                 "--teacher-width", "3", "--factors", "1", "2", "--iterations", "100"]) == 0
    assert (tmp_path / "sweep.tikz").read_text().startswith("% factor 1")
    assert json.loads((tmp_path / "sweep.json").read_text())["student_widths"] == {"1": 3, "2": 6}


def test_approx(tmp_path):
    assert main(["approx", "--out", str(tmp_path), "--epsilon", "0.5", "--t", "2"]) == 0
    rep = json.loads((tmp_path / "approx.json").read_text())
    assert rep["bounds"]["T"] == 188 and rep["sigmoid_degree"] == 108


def test_user_features_protocol(tmp_path):
    """Externally computed features with +-1 labels run through train and eval."""
    rng = np.random.default_rng(0)
    X = rng.standard_normal((120, 6))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1, -1)
    path = tmp_path / "features.csv"
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header="f1,f2,f3,f4,f5,f6,label", comments="")
    out = tmp_path / "g"
    assert main(["train", "geco2", "--data", str(path), "--out", str(out), "--r", "5", "--loss", "logistic",
                 "--standardize"]) == 0
    assert main(["eval", "--model", str(out / "model.json"), "--data", str(path), "--loss", "logistic",
                 "--config", str(out / "metadata.json"), "--out", str(out)]) == 0
    rep = json.loads((out / "eval.json").read_text())
    assert rep["metric"] == "classification_error" and rep["error"] < 0.2
