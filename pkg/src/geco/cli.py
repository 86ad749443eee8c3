"""Command-line interface: ``geco train | eval | experiment | approx``.

Settings are merged as defaults < ``--config`` file < explicit flags.  The
merged values are written to ``metadata.json`` next to every result, and a
metadata file is itself accepted by ``--config``, so a run can be repeated
exactly.

Exit codes: 0 success, 1 numerical failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .approx import fit_sigmoid_poly, sigmoid_degree, sigmoid_net_bounds
from .baseline.mlp import MlpNet, SgdConfig, error_of, sgd_train
from .baseline.overspec import overspec_experiment, overspec_sweep
from .data import Dataset, load_csv, standardize
from .geco2 import TrainConfig, geco2_train
from .geco3 import TensorConfig, geco3_train, tensor_ratio_experiment
from .loss import empirical_risk, get_loss
from .net import PolyNet

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "seed": 0,
    "loss": "squared",
    "label_col": -1,
    "standardize": False,
    "emit": "csv",
    # greedy trainers
    "r": 100,
    "k": 1,
    "epsilon": 0.1,
    "eigen_tol": 1e-8,
    "eigen_max_iter": 1000,
    "refit_tol": 1e-8,
    "refit_max_iter": 5000,
    "tau": 0.5,
    "delta": 0.1,
    "restarts": None,
    # sgd
    "width": 40,
    "activation": "squared",
    "lr": 0.01,
    "decay": 0.0,
    "batch_size": 32,
    "momentum": 0.9,
    "iterations": 1000,
    "eval_every": 100,
    "init_scale": 1.0,
    "test_data": None,
    # experiments
    "d": None,
    "m": None,
    "n_hidden": None,
    "trials": None,
    "teacher_width": None,
    "factors": None,
    "L": 3.0,
    "t": 1,
    "degree": None,
}

EXPERIMENT_DEFAULTS = {
    "overspec": {"d": 10, "m": 30, "n_hidden": 30, "activation": "sigmoid", "trials": 1},
    "overspec-sweep": {"d": 150, "m": 10_000, "teacher_width": 60, "factors": [1, 2, 4, 8],
                       "trials": 1, "activation": "relu", "lr": 0.005, "iterations": 2000,
                       "eval_every": 50},
    "tensor-ratio": {"d": 2, "m": 50, "trials": 200},
    "sigmoid-approx": {},
}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (created if needed)")
    p.add_argument("--config", type=Path, help="JSON config or a previous run's metadata.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--emit", choices=["csv", "tikz-coords", "json"], help="trace format")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=Path, help="CSV file, label in the last column by default")
    p.add_argument("--label-col", type=int, dest="label_col")
    p.add_argument("--standardize", action="store_true", default=None,
                   help="standardize features with training statistics (changes the greedy path)")
    p.add_argument("--loss", choices=["squared", "logistic"])


def _add_greedy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r", type=int, help="greedy iterations")
    p.add_argument("--k", type=int, help="comparator size used for the reported budget")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eigen-tol", type=float, dest="eigen_tol")
    p.add_argument("--eigen-max-iter", type=int, dest="eigen_max_iter")
    p.add_argument("--refit-tol", type=float, dest="refit_tol")
    p.add_argument("--refit-max-iter", type=int, dest="refit_max_iter")
    p.add_argument("--tau", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--restarts", type=int, help="override the tensor restart count")


def _add_sgd(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, help="hidden units")
    p.add_argument("--activation", choices=["squared", "relu", "sigmoid", "identity"])
    p.add_argument("--lr", type=float)
    p.add_argument("--decay", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--momentum", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--eval-every", type=int, dest="eval_every")
    p.add_argument("--init-scale", type=float, dest="init_scale")
    p.add_argument("--test-data", type=Path, dest="test_data")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geco", description="Greedy training of polynomial networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a CSV dataset")
    p.add_argument("algorithm", choices=["geco2", "geco3", "sgd"])
    _add_common(p)
    _add_data(p)
    _add_greedy(p)
    _add_sgd(p)

    p = sub.add_parser("eval", help="evaluate a saved model on a CSV dataset")
    p.add_argument("--model", type=Path, required=True)
    _add_common(p)
    _add_data(p)

    p = sub.add_parser("experiment", help="run a built-in experiment")
    p.add_argument("name", choices=sorted(EXPERIMENT_DEFAULTS))
    _add_common(p)
    _add_greedy(p)
    _add_sgd(p)
    p.add_argument("--loss", choices=["squared", "logistic"])
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--n-hidden", type=int, dest="n_hidden")
    p.add_argument("--trials", type=int, help="trials, or seeds for the overspec experiments")
    p.add_argument("--teacher-width", type=int, dest="teacher_width")
    p.add_argument("--factors", type=int, nargs="+")
    p.add_argument("--L", type=float, dest="L")

    p = sub.add_parser("approx", help="sigmoid polynomial and size bounds")
    _add_common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--L", type=float, dest="L")
    p.add_argument("--t", type=int, help="depth used for the size bounds")
    p.add_argument("--degree", type=int, help="interpolation degree override")
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(obj, dict) and isinstance(obj.get("config"), dict):
        obj = obj["config"]
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: expected a JSON object")
    unknown = set(obj) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return obj


def merge_config(args: argparse.Namespace, extra_defaults: dict | None = None) -> dict:
    """Defaults, then the config file, then every flag given on the command line."""
    cfg = dict(DEFAULTS)
    cfg.update(extra_defaults or {})
    cfg.update(_load_config(getattr(args, "config", None)))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = str(val) if isinstance(val, Path) else val
    return cfg


def _read_data(path, cfg: dict) -> Dataset:
    if path is None:
        raise UsageError("--data is required")
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"data file not found: {path}")
    return load_csv(path, label_col=cfg["label_col"])


def _write_trace(out: Path, emit: str, columns: list[str], rows: list, tikz: str) -> Path:
    if emit == "csv":
        target = out / "trace.csv"
        lines = [",".join(columns)] + [",".join(repr(float(v)) if isinstance(v, float) else str(v)
                                                for v in row) for row in rows]
        target.write_text("\n".join(lines) + "\n")
    elif emit == "tikz-coords":
        target = out / "trace.tikz"
        target.write_text(tikz + "\n")
    else:
        target = out / "trace.json"
        target.write_text(json.dumps({"columns": columns, "rows": rows}, indent=1))
    return target


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**{f.name: cfg[f.name] for f in fields(TrainConfig)})


def _tensor_config(cfg: dict) -> TensorConfig:
    return TensorConfig(tau=cfg["tau"], delta=cfg["delta"], restarts_override=cfg["restarts"], seed=cfg["seed"])


def _sgd_config(cfg: dict) -> SgdConfig:
    return SgdConfig(**{f.name: cfg[f.name] for f in fields(SgdConfig)})


def cmd_train(args) -> int:
    cfg = merge_config(args)
    data = _read_data(args.data, cfg)
    test = _read_data(cfg["test_data"], cfg) if cfg["test_data"] else None
    meta = {"command": "train", "algorithm": args.algorithm, "data": str(args.data)}
    if cfg["standardize"]:
        mu, sd = data.X.mean(axis=0), data.X.std(axis=0)
        sd[sd == 0] = 1.0
        data, *rest = standardize(data, *([test] if test else []))
        test = rest[0] if rest else None
        meta["standardization"] = {"mean": mu.tolist(), "std": sd.tolist()}
    loss = get_loss(cfg["loss"])
    args.out.mkdir(parents=True, exist_ok=True)

    if args.algorithm in ("geco2", "geco3"):
        tc = _train_config(cfg)
        if args.algorithm == "geco2":
            net, trace = geco2_train(data, loss, tc)
        else:
            net, trace = geco3_train(data, loss, tc, _tensor_config(cfg))
        (args.out / "model.json").write_text(net.to_json() + "\n")
        trace_path = _write_trace(args.out, cfg["emit"], trace.columns(), trace.rows(), trace.to_tikz())
        meta["trace_metadata"] = trace.metadata
        meta["iteration_budget"] = trace.metadata["iteration_budget"]
        meta["final_risk"] = trace.final_risk
    else:
        rng = np.random.default_rng(cfg["seed"])
        net = MlpNet.init([data.d, cfg["width"], 1], cfg["activation"], rng, cfg["init_scale"])
        net, trace = sgd_train(net, data, loss, _sgd_config(cfg), test)
        (args.out / "model.json").write_text(json.dumps(net.to_dict()) + "\n")
        trace_path = _write_trace(args.out, cfg["emit"], ["iteration", trace.metric], trace.points,
                                  trace.to_tikz())
        meta["metric"] = trace.metric
        meta["final_error"] = trace.points[-1][1] if trace.points else None
    meta["config"] = {k: cfg[k] for k in DEFAULTS}
    meta["trace"] = trace_path.name
    _write_json(args.out / "metadata.json", meta)
    print(f"wrote {args.out / 'model.json'}, {trace_path} and {args.out / 'metadata.json'}")
    return EXIT_OK


def _load_model(path: Path):
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    obj = json.loads(path.read_text())
    if "neurons" in obj:
        return PolyNet.from_dict(obj)
    if "weights" in obj:
        return MlpNet.from_dict(obj)
    raise UsageError(f"{path}: not a recognized model file")


def cmd_eval(args) -> int:
    cfg = merge_config(args)
    model = _load_model(args.model)
    data = _read_data(args.data, cfg)
    if args.config is not None:
        stats = json.loads(args.config.read_text()).get("standardization")
        if stats:
            data = Dataset((data.X - np.array(stats["mean"])) / np.array(stats["std"]), data.y, data.kind)
    loss = get_loss(cfg["loss"])
    expected = model.d if isinstance(model, PolyNet) else model.sizes[0]
    if expected != data.d:
        raise UsageError(f"model expects {expected} features, {args.data} has {data.d}")
    if isinstance(model, PolyNet):
        risk = empirical_risk(model, data, loss)
    else:
        risk = float(np.mean(loss.value(model.predict(data.X), data.y)))
    metric, err = error_of(model, data, loss)
    report = {"model": str(args.model), "data": str(args.data), "m": data.m, "loss": loss.kind,
              "risk": risk, "metric": metric, "error": err}
    args.out.mkdir(parents=True, exist_ok=True)
    _write_json(args.out / "eval.json", report)
    print(json.dumps(report))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = merge_config(args, EXPERIMENT_DEFAULTS[args.name])
    args.out.mkdir(parents=True, exist_ok=True)
    name = args.name
    meta = {"command": "experiment", "experiment": name, "config": {k: cfg[k] for k in DEFAULTS}}
    if name == "overspec":
        reports = [overspec_experiment(cfg["d"], cfg["m"], cfg["n_hidden"], cfg["activation"],
                                       seed=cfg["seed"] + i).to_dict() for i in range(cfg["trials"])]
        summary = {"trials": reports,
                   "all_full_rank": all(r["rank"] == cfg["m"] for r in reports),
                   "max_risk": max(r["risk"] for r in reports)}
        _write_json(args.out / "overspec.json", summary)
        print(f"rank {[r['rank'] for r in reports]}, max risk {summary['max_risk']:.3g}")
    elif name == "overspec-sweep":
        res = overspec_sweep(d=cfg["d"], teacher_width=cfg["teacher_width"], factors=cfg["factors"],
                             m=cfg["m"], seeds=range(cfg["seed"], cfg["seed"] + cfg["trials"]),
                             student_activation=cfg["activation"], loss=cfg["loss"],
                             cfg=_sgd_config(cfg), binary=False)
        lines = ["factor,iteration,error"]
        tikz = []
        for f in res.factors:
            pts = res.mean_trace(f)
            lines += [f"{f},{it},{e!r}" for it, e in pts]
            tikz.append(f"% factor {f}\n" + " ".join(f"({it},{e:.4f})" for it, e in pts))
        (args.out / "sweep.csv").write_text("\n".join(lines) + "\n")
        (args.out / "sweep.tikz").write_text("\n".join(tikz) + "\n")
        summary = {"median_iterations": {str(k): v for k, v in res.median_iterations().items()},
                   "monotone": res.is_monotone(), **res.metadata}
        _write_json(args.out / "sweep.json", summary)
        print(f"median iterations to threshold {summary['median_iterations']}, monotone={res.is_monotone()}")
    elif name == "tensor-ratio":
        rep = tensor_ratio_experiment(d=cfg["d"], tau=cfg["tau"], delta=cfg["delta"],
                                      trials=cfg["trials"], m=cfg["m"], seed=cfg["seed"])
        _write_json(args.out / "tensor_ratio.json", rep)
        print(f"success fraction {rep['success_fraction']:.3f} over {rep['trials']} trials")
    else:
        approx = fit_sigmoid_poly(cfg["epsilon"], cfg["L"], cfg["degree"])
        rep = json.loads(approx.to_json())
        rep["sigmoid_degree"] = sigmoid_degree(cfg["epsilon"], cfg["L"])
        _write_json(args.out / "sigmoid_approx.json", rep)
        print(f"degree {approx.degree}, grid sup error {approx.sup_error:.4g} (epsilon {approx.epsilon})")
    _write_json(args.out / "metadata.json", meta)
    return EXIT_OK


def cmd_approx(args) -> int:
    cfg = merge_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    approx = fit_sigmoid_poly(cfg["epsilon"], cfg["L"], cfg["degree"])
    rep = json.loads(approx.to_json())
    rep["sigmoid_degree"] = sigmoid_degree(cfg["epsilon"], cfg["L"])
    rep["bounds"] = sigmoid_net_bounds(cfg["t"], cfg["L"], cfg["epsilon"]).to_dict()
    _write_json(args.out / "approx.json", rep)
    _write_json(args.out / "metadata.json", {"command": "approx", "config": {k: cfg[k] for k in DEFAULTS}})
    print(json.dumps({k: rep[k] for k in ("degree", "sup_error", "sigmoid_degree")}))
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "experiment": cmd_experiment, "approx": cmd_approx}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ArithmeticError as exc:  # includes NumericalFailure
        print(f"geco: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (UsageError, ValueError, OSError) as exc:
        print(f"geco: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
