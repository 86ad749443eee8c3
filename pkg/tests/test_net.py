import json
from collections import defaultdict

import numpy as np
import pytest

from geco.net import BasisFunction, PolyNet, evaluate


def expand(net):
    """Monomial coefficients of the network, keyed by sorted variable-index tuples."""
    poly = defaultdict(float)
    poly[()] += net.bias
    for j, w in enumerate(net.direct_term):
        poly[(j,)] += w
    for alpha, g in net.neurons:
        terms = {(): alpha}
        for w in g.directions:
            nxt = defaultdict(float)
            for key, coef in terms.items():
                for j, wj in enumerate(w):
                    nxt[tuple(sorted(key + (j,)))] += coef * wj
            terms = nxt
        for key, coef in terms.items():
            poly[key] += coef
    return poly


def eval_monomials(poly, x):
    return sum(coef * np.prod([x[j] for j in key]) for key, coef in poly.items())


def random_net(rng, d, n):
    bases = [BasisFunction.from_vectors(*rng.standard_normal((rng.integers(1, 4), d))) for _ in range(n)]
    return PolyNet.from_parts(rng.normal(), rng.standard_normal(d), rng.uniform(-1, 1, n), bases)


def test_zero_net_is_zero():
    assert evaluate(PolyNet.zero(4), np.array([1.0, -2.0, 3.0, 0.5])) == 0.0


def test_hand_evaluated_square_neuron():
    net = PolyNet.from_parts(1.0, [1.0, 0.0], [2.0], [BasisFunction.square([0.0, 1.0])])
    assert evaluate(net, [3.0, 5.0]) == pytest.approx(54.0, abs=1e-12)


def test_degree3_neuron_is_product_of_projections():
    net = PolyNet.from_parts(0.0, np.zeros(3), [1.0], [BasisFunction(np.eye(3))])
    assert evaluate(net, [2.0, 3.0, 4.0]) == pytest.approx(24.0, abs=1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        evaluate(PolyNet.zero(3), [1.0, 2.0])


def test_non_unit_direction_rejected():
    with pytest.raises(ValueError):
        BasisFunction(np.array([[1.0, 1.0]]))


def test_matches_monomial_expansion():
    rng = np.random.default_rng(3)
    d = 5
    net = random_net(rng, d, 12)
    poly = expand(net)
    X = rng.uniform(-1, 1, (1000, d))
    ours = net.predict(X)
    ref = np.array([eval_monomials(poly, x) for x in X])
    scale = np.maximum(np.abs(ref), 1.0)
    assert np.max(np.abs(ours - ref) / scale) <= 1e-10


def test_storage_order_does_not_matter():
    rng = np.random.default_rng(5)
    net = random_net(rng, 4, 30)
    shuffled = PolyNet(net.bias, net.direct_term, tuple(net.neurons[i] for i in rng.permutation(30)))
    X = rng.standard_normal((200, 4))
    assert np.allclose(net.predict(X), shuffled.predict(X), rtol=0, atol=1e-12 * 32 * (1 + np.abs(net.predict(X)).max()))


def test_p2k_membership():
    sq = BasisFunction.square([1.0, 0.0])
    assert PolyNet.from_parts(0, [0, 0], [0.5, -1.0], [sq, sq]).in_p2k(2)
    assert not PolyNet.from_parts(0, [0, 0], [1.5], [sq]).in_p2k(2)
    assert not PolyNet.from_parts(0, [0, 0], [0.5], [BasisFunction(np.eye(2))]).in_p2k(2)
    assert not PolyNet.from_parts(0, [0, 0], [0.5, 0.5, 0.5], [sq] * 3).in_p2k(2)


def test_json_round_trip_is_exact():
    rng = np.random.default_rng(7)
    net = random_net(rng, 3, 5)
    back = PolyNet.from_json(net.to_json())
    X = rng.standard_normal((20, 3))
    assert np.array_equal(net.predict(X), back.predict(X))
    obj = json.loads(net.to_json())
    assert set(obj) == {"d", "bias", "direct_term", "neurons"}
    assert set(obj["neurons"][0]) == {"alpha", "degree", "directions"}
