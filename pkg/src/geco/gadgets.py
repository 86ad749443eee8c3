"""Explicit squared-activation networks for identity, products, powers and polynomials.

Every construction rests on two exact identities:

    z        = (z/2 + 1/2)^2 - (z/2 - 1/2)^2
    z1 * z2  = ((z1 + z2)/2)^2 - ((z1 - z2)/2)^2

so a value can be carried one layer deeper with two squared neurons, and two
values can be multiplied with two squared neurons.  Networks are stored as
explicit layers of neurons so their depth and size can be counted.

Depth counts every layer of neurons including the (linear) output layer;
size counts hidden neurons only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .net import PolyNet

__all__ = [
    "Neuron",
    "GadgetNet",
    "evaluate_gadget",
    "square_gadget",
    "identity_gadget",
    "product_gadget",
    "power_gadget",
    "power_depth_bound",
    "polynomial_gadget",
    "pad_to_depth",
    "parallel",
    "combine_outputs",
    "compose_affine",
    "polynet_to_gadget",
]

SQUARE = "square"
IDENTITY = "identity"


class Neuron(NamedTuple):
    weights: np.ndarray
    bias: float
    activation: str


@dataclass(frozen=True)
class GadgetNet:
    n_inputs: int
    layers: tuple  # of tuples of Neuron; the last layer is the output layer

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a network needs at least an output layer")
        width = self.n_inputs
        for depth, layer in enumerate(self.layers, start=1):
            if not layer:
                raise ValueError(f"layer {depth} is empty")
            expected = IDENTITY if depth == len(self.layers) else SQUARE
            for nrn in layer:
                if nrn.activation != expected:
                    raise ValueError(f"layer {depth} neurons must use the {expected} activation")
                if np.shape(nrn.weights) != (width,):
                    raise ValueError(f"layer {depth} neuron has {np.size(nrn.weights)} weights, expected {width}")
            width = len(layer)

    @classmethod
    def from_matrices(cls, n_inputs: int, mats: Sequence[tuple[np.ndarray, np.ndarray]]) -> "GadgetNet":
        layers = []
        for i, (W, b) in enumerate(mats):
            act = IDENTITY if i == len(mats) - 1 else SQUARE
            layers.append(tuple(Neuron(np.array(w, dtype=float), float(bi), act) for w, bi in zip(W, b)))
        return cls(n_inputs, tuple(layers))

    @cached_property
    def matrices(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(np.array([n.weights for n in layer], dtype=float),
                 np.array([n.bias for n in layer], dtype=float)) for layer in self.layers]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def size(self) -> int:
        return sum(len(layer) for layer in self.layers[:-1])

    @property
    def n_outputs(self) -> int:
        return len(self.layers[-1])

    def __call__(self, x):
        return evaluate_gadget(self, x)


def evaluate_gadget(net: GadgetNet, x) -> np.ndarray:
    """Forward pass; ``x`` may be one input vector or a batch of rows.

    A scalar is accepted for single-input networks.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    if x.ndim == 0:
        x = x.reshape(1)
    h = np.atleast_2d(x) if single else x
    if h.shape[1] != net.n_inputs:
        raise ValueError(f"input has {h.shape[1]} features, network expects {net.n_inputs}")
    mats = net.matrices
    for W, b in mats[:-1]:
        h = np.square(h @ W.T + b)
    W, b = mats[-1]
    out = h @ W.T + b
    return out[0] if single else out


class _Builder:
    """Grows a network layer by layer.

    A *signal* is an affine form over the outputs of the current last layer,
    stored as a vector whose final entry is the constant.
    """

    def __init__(self, n_inputs: int):
        self.n_inputs = n_inputs
        self.width = n_inputs
        self.layers: list[tuple[np.ndarray, np.ndarray]] = []

    def input(self, j: int) -> np.ndarray:
        s = np.zeros(self.width + 1)
        s[j] = 1.0
        return s

    def affine(self, coef, const: float = 0.0) -> np.ndarray:
        return np.append(np.asarray(coef, dtype=float), const)

    def layer(self, ops) -> list[np.ndarray]:
        """Apply one hidden layer; ``ops`` items are ``("sq", s)``, ``("id", s)`` or ``("mul", s1, s2)``."""
        rows = []
        outs = []
        for op in ops:
            kind = op[0]
            if kind == "sq":
                rows.append(op[1])
                outs.append([(len(rows) - 1, 1.0)])
            elif kind in ("id", "mul"):
                if kind == "id":
                    a, b = 0.5 * op[1], np.zeros_like(op[1])
                    b[-1] = 0.5
                else:
                    a, b = 0.5 * op[1], 0.5 * op[2]
                rows.append(a + b)
                rows.append(a - b)
                outs.append([(len(rows) - 2, 1.0), (len(rows) - 1, -1.0)])
            else:
                raise ValueError(f"unknown op {kind!r}")
        R = np.array(rows)
        self.layers.append((R[:, :-1], R[:, -1]))
        self.width = len(rows)
        signals = []
        for terms in outs:
            s = np.zeros(self.width + 1)
            for k, coef in terms:
                s[k] += coef
            signals.append(s)
        return signals

    def finish(self, outputs: Sequence[np.ndarray]) -> GadgetNet:
        O = np.array(outputs)
        return GadgetNet.from_matrices(self.n_inputs, self.layers + [(O[:, :-1], O[:, -1])])


def square_gadget(w) -> GadgetNet:
    """One hidden neuron ``(w . x)^2`` feeding the output with weight 1."""
    w = np.asarray(w, dtype=float)
    b = _Builder(w.size)
    (s,) = b.layer([("sq", b.affine(w))])
    return b.finish([s])


def identity_gadget() -> GadgetNet:
    b = _Builder(1)
    (s,) = b.layer([("id", b.input(0))])
    return b.finish([s])


def product_gadget() -> GadgetNet:
    b = _Builder(2)
    (s,) = b.layer([("mul", b.input(0), b.input(1))])
    return b.finish([s])


def _reduce_products(b: _Builder, signals: list) -> np.ndarray:
    """Pairwise product tree, pairing left to right; an odd tail is carried."""
    while len(signals) > 1:
        ops = [("mul", signals[i], signals[i + 1]) for i in range(0, len(signals) - 1, 2)]
        if len(signals) % 2:
            ops.append(("id", signals[-1]))
        signals = b.layer(ops)
    return signals[0]


def power_gadget(T: int) -> GadgetNet:
    """Network computing ``x -> x^T`` from the binary expansion of ``T``.

    Layer ``k`` squares ``x^(2^(k-1))`` into ``x^(2^k)``; powers needed by the
    expansion are carried forward with identity pairs until the squaring
    chain ends, then multiplied together by a pairwise product tree.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    b = _Builder(1)
    chain = b.input(0)
    K = T.bit_length() - 1
    selected: list = []
    for k in range(1, K + 1):
        ops = [("sq", chain)] + [("id", s) for s in selected]
        keep_chain = bool(T >> (k - 1) & 1)
        if keep_chain:
            ops.append(("id", chain))
        out = b.layer(ops)
        chain = out[0]
        selected = out[1:]
    selected.append(chain)
    if not b.layers:
        selected = b.layer([("id", chain)])
    return b.finish([_reduce_products(b, selected)])


def power_depth_bound(T: int) -> int:
    """``ceil(log2 T) + ceil(log2 ceil(log2 T)) + 2`` (log terms of 0 or 1 count as 0)."""
    lt = math.ceil(math.log2(T)) if T > 1 else 0
    llt = math.ceil(math.log2(lt)) if lt > 1 else 0
    return lt + llt + 2


def pad_to_depth(net: GadgetNet, depth: int) -> GadgetNet:
    """Push the outputs through identity pairs until the network has ``depth`` layers."""
    if depth < net.depth:
        raise ValueError(f"cannot shrink a depth-{net.depth} network to depth {depth}")
    mats = list(net.matrices)
    while len(mats) < depth:
        W, b = mats.pop()
        n = W.shape[0]
        half_W, half_b = 0.5 * W, 0.5 * b
        hidden_W = np.empty((2 * n, W.shape[1]))
        hidden_b = np.empty(2 * n)
        hidden_W[0::2], hidden_W[1::2] = half_W, half_W
        hidden_b[0::2], hidden_b[1::2] = half_b + 0.5, half_b - 0.5
        out_W = np.zeros((n, 2 * n))
        out_W[np.arange(n), 2 * np.arange(n)] = 1.0
        out_W[np.arange(n), 2 * np.arange(n) + 1] = -1.0
        mats += [(hidden_W, hidden_b), (out_W, np.zeros(n))]
    return GadgetNet.from_matrices(net.n_inputs, mats)


def parallel(nets: Sequence[GadgetNet]) -> GadgetNet:
    """Side-by-side networks on a shared input; outputs are concatenated."""
    if not nets:
        raise ValueError("need at least one network")
    n_in = nets[0].n_inputs
    if any(n.n_inputs != n_in for n in nets):
        raise ValueError("networks must share the input dimension")
    depth = max(n.depth for n in nets)
    padded = [pad_to_depth(n, depth) for n in nets]
    mats = []
    for layer in range(depth):
        Ws = [p.matrices[layer][0] for p in padded]
        bs = [p.matrices[layer][1] for p in padded]
        if layer == 0:
            W = np.vstack(Ws)
        else:
            W = np.zeros((sum(w.shape[0] for w in Ws), sum(w.shape[1] for w in Ws)))
            r = c = 0
            for w in Ws:
                W[r:r + w.shape[0], c:c + w.shape[1]] = w
                r += w.shape[0]
                c += w.shape[1]
        mats.append((W, np.concatenate(bs)))
    return GadgetNet.from_matrices(n_in, mats)


def combine_outputs(net: GadgetNet, coeffs, bias: float = 0.0) -> GadgetNet:
    """Replace the outputs ``o`` with the single output ``coeffs . o + bias``."""
    coeffs = np.asarray(coeffs, dtype=float)
    mats = list(net.matrices)
    W, b = mats.pop()
    if coeffs.shape != (W.shape[0],):
        raise ValueError(f"need {W.shape[0]} coefficients, got {coeffs.size}")
    mats.append(((coeffs @ W)[None, :], np.array([coeffs @ b + bias])))
    return GadgetNet.from_matrices(net.n_inputs, mats)


def compose_affine(net: GadgetNet, A, c) -> GadgetNet:
    """Precompose with ``x -> A x + c`` (folded into the first layer)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if A.shape[0] != net.n_inputs or c.shape != (net.n_inputs,):
        raise ValueError("affine map does not match the network input dimension")
    mats = list(net.matrices)
    W, b = mats[0]
    mats[0] = (W @ A, b + W @ c)
    return GadgetNet.from_matrices(A.shape[1], mats)


def polynomial_gadget(coeffs: Sequence[float], constant: float = 0.0) -> GadgetNet:
    """Network computing ``x -> constant + sum_k coeffs[k-1] x^k``.

    One power gadget per nonzero coefficient, aligned to a common depth with
    identity padding and summed in the output layer.
    """
    coeffs = [float(a) for a in coeffs]
    powers = [k for k, a in enumerate(coeffs, start=1) if a != 0.0]
    if not powers:
        raise ValueError("at least one coefficient must be nonzero")
    net = parallel([power_gadget(k) for k in powers])
    return combine_outputs(net, [coeffs[k - 1] for k in powers], constant)


def polynet_to_gadget(net: PolyNet) -> GadgetNet:
    """Expand a :class:`PolyNet` into an explicit network with two squared hidden layers.

    Degree-3 neurons use a product pair and an identity pair in the first
    layer and a product pair in the second (6 neurons); degree-2 neurons use
    one squared neuron and an identity pair (3); degree-1 neurons and the
    direct linear term use two identity pairs (4).
    """
    b = _Builder(net.d)
    first, plan = [], []
    if np.any(net.direct_term):
        plan.append(("lin", 1.0, len(first)))
        first.append(("id", b.affine(net.direct_term)))
    for alpha, g in net.neurons:
        W = g.directions
        plan.append((g.degree, alpha, len(first)))
        if g.degree == 1:
            first.append(("id", b.affine(W[0])))
        elif g.degree == 2:
            first.append(("mul", b.affine(W[0]), b.affine(W[1]))
                         if not np.array_equal(W[0], W[1]) else ("sq", b.affine(W[0])))
        else:
            first.append(("mul", b.affine(W[0]), b.affine(W[1])))
            first.append(("id", b.affine(W[2])))
    if not first:
        first.append(("id", b.affine(np.zeros(net.d))))
    s1 = b.layer(first)
    second, weights = [], []
    for kind, alpha, idx in plan:
        if kind == 3:
            second.append(("mul", s1[idx], s1[idx + 1]))
        else:
            second.append(("id", s1[idx]))
        weights.append(alpha)
    if not second:
        second.append(("id", s1[0]))
        weights.append(0.0)
    s2 = b.layer(second)
    out = sum(w * s for w, s in zip(weights, s2))
    out = out + 0.0  # copy
    out[-1] += net.bias
    return b.finish([out])
