"""Datasets: CSV ingestion, synthetic teachers, splits and standardization."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .net import BasisFunction, PolyNet

__all__ = [
    "Dataset",
    "DataFormatError",
    "load_csv",
    "save_csv",
    "split",
    "standardize",
    "gen_teacher_p2k",
    "fixed_square_teacher",
    "gen_teacher_mlp",
    "gen_product_teacher",
]


class DataFormatError(ValueError):
    """Malformed CSV input; the message names the offending row and column."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    kind: str = "regression"  # or "binary"
    feature_names: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"features must be an m x d matrix with m, d >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"labels have shape {y.shape}, expected ({X.shape[0]},)")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if self.kind not in ("regression", "binary"):
            raise ValueError(f"unknown label kind {self.kind!r}")
        if self.kind == "binary" and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("binary labels must be in {-1, +1}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.kind, self.feature_names)

    def with_labels(self, y, kind=None) -> "Dataset":
        return Dataset(self.X, y, kind or self.kind, self.feature_names)


def _label_kind(y: np.ndarray) -> str:
    return "binary" if np.all(np.isin(y, (-1.0, 1.0))) else "regression"


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_col: int = -1, header: bool | None = None) -> Dataset:
    """Read a numeric CSV table; the label column is the last one by default.

    ``header=None`` auto-detects a header line: the first line is a header
    only if none of its cells parse as numbers.  Rows are numbered from 1
    among data rows in error messages.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    names = None
    if header is None:
        header = not any(_is_number(c) for c in rows[0])
    if header:
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{path}: header but no data rows")
    width = len(rows[0])
    if width < 2:
        raise DataFormatError(f"{path}: need at least one feature column and a label column")
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {i} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row, start=1):
            try:
                values[i - 1, j - 1] = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}: row {i}, column {j}: non-numeric value {cell!r}") from None
            if not math.isfinite(values[i - 1, j - 1]):
                raise DataFormatError(f"{path}: row {i}, column {j}: non-finite value {cell!r}")
    if not -width <= label_col < width:
        raise DataFormatError(f"{path}: label column {label_col} out of range for {width} columns")
    label_col %= width
    y = values[:, label_col]
    X = np.delete(values, label_col, axis=1)
    if names is not None:
        names = tuple(n for k, n in enumerate(names) if k != label_col)
    return Dataset(X, y, _label_kind(y), names)


def save_csv(data: Dataset, path, header: bool = False) -> None:
    """Write features then label; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            names = list(data.feature_names or [f"x{j + 1}" for j in range(data.d)])
            writer.writerow(names + ["y"])
        for xi, yi in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def split(data: Dataset, train_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random partition into (train, test)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(data.m)
    n_train = min(max(1, int(round(train_fraction * data.m))), data.m - 1)
    return data.subset(np.sort(perm[:n_train])), data.subset(np.sort(perm[n_train:]))


def standardize(train: Dataset, *others: Dataset) -> list[Dataset]:
    """Zero-mean / unit-variance features using ``train`` statistics only.

    Changes the greedy trajectory of the eigen steps, which is why it is off
    unless requested.
    """
    mu = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    sd[sd == 0] = 1.0
    return [Dataset((ds.X - mu) / sd, ds.y, ds.kind, ds.feature_names) for ds in (train, *others)]


def _teacher_data(teacher: PolyNet, m: int, rng, noise_sd: float) -> Dataset:
    X = rng.standard_normal((m, teacher.d))
    y = teacher.predict(X)
    if noise_sd > 0:
        y = y + noise_sd * rng.standard_normal(m)
    return Dataset(X, y)


def gen_teacher_p2k(d: int, k: int, m: int, seed: int = 0, noise_sd: float = 0.0) -> tuple[Dataset, PolyNet]:
    """Sample a random member of the constrained depth-2 class and label Gaussian inputs with it."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((k, d))
    alphas = rng.uniform(-1.0, 1.0, size=k)
    bias = rng.uniform(-0.1, 0.1)
    w0 = 0.1 * rng.standard_normal(d) / np.sqrt(d)
    teacher = PolyNet.from_parts(bias, w0, alphas, [BasisFunction.square(w) for w in W])
    return _teacher_data(teacher, m, rng, noise_sd), teacher


def fixed_square_teacher(d: int, m: int, seed: int = 0, bias: float = 0.0, direct_term=None,
                         noise_sd: float = 0.0) -> tuple[Dataset, PolyNet]:
    """Teacher ``b + w0 . x + (x_1)^2``; only the inputs depend on ``seed``."""
    e1 = np.zeros(d)
    e1[0] = 1.0
    w0 = np.zeros(d) if direct_term is None else np.asarray(direct_term, dtype=float)
    teacher = PolyNet.from_parts(bias, w0, [1.0], [BasisFunction.square(e1)])
    return _teacher_data(teacher, m, np.random.default_rng(seed), noise_sd), teacher


def gen_product_teacher(d: int, m: int, seed: int = 0, noise_sd: float = 0.0) -> tuple[Dataset, PolyNet]:
    """Teacher ``(e1 . x)(e2 . x)(e3 . x)`` on standard Gaussian inputs (``d >= 3``)."""
    if d < 3:
        raise ValueError("the product teacher needs d >= 3")
    E = np.eye(d)[:3]
    teacher = PolyNet.from_parts(0.0, np.zeros(d), [1.0], [BasisFunction(E)])
    return _teacher_data(teacher, m, np.random.default_rng(seed), noise_sd), teacher


def gen_teacher_mlp(d: int, width: int, activation: str, m: int, seed: int = 0, binary: bool = False):
    """Random depth-2 teacher MLP and Gaussian inputs labelled by it.

    With ``binary=True`` the labels are the sign of the teacher output
    (zeros mapped to +1).
    """
    from .baseline.mlp import MlpNet

    if width < 1:
        raise ValueError("width must be >= 1")
    rng = np.random.default_rng(seed)
    teacher = MlpNet.init([d, width, 1], activation, rng)
    X = rng.standard_normal((m, d))
    out = teacher.forward(X)
    if binary:
        return Dataset(X, np.where(out >= 0, 1.0, -1.0), "binary"), teacher
    return Dataset(X, out), teacher
