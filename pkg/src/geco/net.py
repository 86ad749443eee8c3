"""Polynomial networks built from rank-one monomial neurons.

A :class:`PolyNet` computes

    f(x) = b + w0 . x + sum_i alpha_i * prod_j (w_ij . x)

where every neuron is a :class:`BasisFunction` of degree 1, 2 or 3 with
unit-norm directions.  Depth-2 squared-activation networks are the special
case in which every neuron has degree 2.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = ["BasisFunction", "PolyNet", "evaluate", "UNIT_NORM_TOL"]

UNIT_NORM_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasisFunction:
    """Hidden neuron ``x -> prod_j (w_j . x)`` with ``||w_j|| = 1``."""

    directions: np.ndarray  # shape (degree, d)

    def __post_init__(self):
        W = _frozen(self.directions)
        if W.ndim != 2 or not 1 <= W.shape[0] <= 3:
            raise ValueError(f"directions must have shape (degree, d) with degree in 1..3, got {W.shape}")
        norms = np.linalg.norm(W, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError(f"directions must have unit norm, got norms {norms}")
        object.__setattr__(self, "directions", W)

    @classmethod
    def from_vectors(cls, *vectors) -> "BasisFunction":
        """Build a neuron from arbitrary nonzero vectors, normalizing each."""
        W = np.array(vectors, dtype=float)
        norms = np.linalg.norm(W, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("direction vectors must be nonzero")
        return cls(W / norms)

    @classmethod
    def square(cls, w) -> "BasisFunction":
        """The degree-2 neuron ``(w . x)^2``."""
        return cls.from_vectors(w, w)

    @property
    def degree(self) -> int:
        return self.directions.shape[0]

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.prod(X @ self.directions.T, axis=-1)

    def __eq__(self, other):
        return isinstance(other, BasisFunction) and np.array_equal(self.directions, other.directions)

    def __hash__(self):
        return hash(self.directions.tobytes())


@dataclass(frozen=True)
class PolyNet:
    bias: float
    direct_term: np.ndarray
    neurons: tuple = field(default_factory=tuple)  # of (alpha, BasisFunction)

    def __post_init__(self):
        w0 = _frozen(self.direct_term)
        if w0.ndim != 1 or w0.size < 1:
            raise ValueError("direct_term must be a nonempty vector")
        neurons = tuple((float(a), g) for a, g in self.neurons)
        for _, g in neurons:
            if g.d != w0.size:
                raise ValueError(f"neuron dimension {g.d} does not match network dimension {w0.size}")
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "direct_term", w0)
        object.__setattr__(self, "neurons", neurons)

    @classmethod
    def zero(cls, d: int) -> "PolyNet":
        return cls(0.0, np.zeros(d), ())

    @classmethod
    def from_parts(cls, bias, direct_term, alphas: Sequence[float], bases: Iterable[BasisFunction]) -> "PolyNet":
        bases = list(bases)
        if len(alphas) != len(bases):
            raise ValueError("need one coefficient per neuron")
        return cls(bias, direct_term, tuple(zip(alphas, bases)))

    @property
    def d(self) -> int:
        return self.direct_term.size

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a for a, _ in self.neurons])

    @property
    def bases(self) -> list[BasisFunction]:
        return [g for _, g in self.neurons]

    def degrees(self) -> list[int]:
        return [g.degree for _, g in self.neurons]

    def in_p2k(self, k: int) -> bool:
        """Membership in the constrained depth-2 class with at most ``k`` neurons."""
        return (len(self.neurons) <= k
                and all(g.degree == 2 and np.array_equal(*g.directions) for g in self.bases)
                and all(abs(a) <= 1.0 for a in self.alphas))

    def predict(self, X) -> np.ndarray:
        """Vectorized evaluation on the rows of ``X``.

        Terms are accumulated in storage order with Neumaier compensation.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected inputs of shape (m, {self.d}), got {X.shape}")
        total = np.full(X.shape[0], self.bias)
        comp = np.zeros(X.shape[0])

        def add(term):
            nonlocal total
            t = total + term
            big = np.abs(total) >= np.abs(term)
            comp[:] += np.where(big, (total - t) + term, (term - t) + total)
            total = t

        add(X @ self.direct_term)
        for alpha, g in self.neurons:
            add(alpha * g(X))
        return total + comp

    def __call__(self, x) -> float:
        return evaluate(self, x)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "bias": self.bias,
            "direct_term": self.direct_term.tolist(),
            "neurons": [
                {"alpha": a, "degree": g.degree, "directions": g.directions.tolist()}
                for a, g in self.neurons
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PolyNet":
        d = int(obj["d"])
        w0 = np.asarray(obj["direct_term"], dtype=float)
        if w0.shape != (d,):
            raise ValueError(f"direct_term has length {w0.size}, expected {d}")
        neurons = []
        for item in obj["neurons"]:
            g = BasisFunction(np.asarray(item["directions"], dtype=float))
            if g.degree != int(item["degree"]):
                raise ValueError("neuron degree does not match its direction count")
            neurons.append((float(item["alpha"]), g))
        return cls(float(obj["bias"]), w0, tuple(neurons))

    def to_json(self, **kwargs) -> str:
        # json renders floats with repr(), i.e. shortest round-trip decimal.
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PolyNet":
        return cls.from_dict(json.loads(text))


def evaluate(net: PolyNet, x) -> float:
    """``f(x)`` for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.d,):
        raise ValueError(f"input has shape {x.shape}, network expects ({net.d},)")
    return float(net.predict(x[None, :])[0])
