import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolip.network import (DenseLayer, Network, NetworkFormatError, ScalarNetwork, forward,
                            gradient_at, gradient_for_pattern, load_network, pattern_at,
                            random_network, save_network, scalar_from_weights, select_output)


def test_load_example(example_net):
    assert example_net.input_dim == 2
    assert example_net.depth == 2
    np.testing.assert_array_equal(example_net.layers[0].weights, [[1, -1], [2, 0]])
    assert example_net.slopes == (0.0, 1.0)


def test_bias_defaults_to_zero(example_doc):
    doc = json.loads(example_doc)
    for layer in doc["layers"]:
        del layer["bias"]
    net = load_network(json.dumps(doc))
    np.testing.assert_array_equal(net.layers[0].bias, [0, 0])


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d.update(layers=[]), "at least one layer"),
    (lambda d: d["layers"][1].update(weights=[[1.0, 1.0, 1.0]]), "dimension mismatch"),
    (lambda d: d["activation"].update(kind="tanh"), "unknown activation"),
    (lambda d: d.update(format="other"), "format"),
    (lambda d: d["layers"][0].update(bias=[0.0]), "bias"),
    (lambda d: d["layers"][0].update(weights=[[1.0], [2.0, 0.0]]), "rectangular"),
])
def test_load_errors(example_doc, mutate, message):
    doc = json.loads(example_doc)
    mutate(doc)
    with pytest.raises(NetworkFormatError, match=message):
        load_network(json.dumps(doc))


def test_load_rejects_non_finite_and_garbage():
    with pytest.raises(NetworkFormatError):
        load_network(b"{not json")
    doc = {"format": "geolip-net-v1", "input_dim": 1, "layers": [{"weights": [[1e999]]}]}
    with pytest.raises(NetworkFormatError, match="non-finite"):
        load_network(json.dumps(doc))


def test_roundtrip_example(example_net):
    again = load_network(save_network(example_net))
    assert save_network(again) == save_network(example_net)


def test_roundtrip_random_bit_exact():
    net = random_network([7, 5, 4, 3, 2, 1], seed=3)
    layers = [DenseLayer(l.weights, np.random.default_rng(i).standard_normal(l.n_out) / 3)
              for i, l in enumerate(net.layers)]
    net = Network(net.input_dim, tuple(layers))
    again = load_network(save_network(net))
    for a, b in zip(net.layers, again.layers):
        assert a.weights.tobytes() == b.weights.tobytes()
        assert a.bias.tobytes() == b.bias.tobytes()


def test_save_refuses_nan(example_net):
    W = example_net.layers[0].weights
    W.setflags(write=True)  # deliberately tamper with a frozen array
    W[0, 0] = np.nan
    with pytest.raises(ValueError):
        save_network(example_net)


def test_construction_invariants():
    with pytest.raises(NetworkFormatError):
        Network(2, ())
    with pytest.raises(NetworkFormatError):
        Network(2, (DenseLayer(np.ones((2, 3))),))
    with pytest.raises(NetworkFormatError):
        Network(1, (DenseLayer(np.ones((1, 1))),), slope_min=1.0, slope_max=0.0,
                activation="piecewise_linear")
    with pytest.raises(NetworkFormatError):
        DenseLayer(np.ones((2, 2)), np.ones(3))
    net = random_network([2, 2, 1])
    with pytest.raises(ValueError):
        net.layers[0].weights[0, 0] = 5.0


def test_random_network_determinism_and_shapes():
    a = random_network([2, 2, 1], seed=7)
    b = random_network([2, 2, 1], seed=7)
    assert save_network(a) == save_network(b)
    assert save_network(a) != save_network(random_network([2, 2, 1], seed=8))
    big = random_network([784, 64, 1], seed=1)
    assert [l.weights.shape for l in big.layers] == [(64, 784), (1, 64)]
    W = random_network([3, 50, 1], seed=2, scale=0.5).layers[0].weights
    assert np.abs(W).max() <= 0.5 and np.all(big.layers[0].bias == 0)
    with pytest.raises(ValueError):
        random_network([3])


def test_random_network_stream_discipline():
    # layers are drawn in order, row-major, from one PCG64 stream
    rng = np.random.Generator(np.random.PCG64(5))
    first = rng.uniform(-2, 2, size=(4, 3))
    second = rng.uniform(-2, 2, size=(1, 4))
    net = random_network([3, 4, 1], seed=5, scale=2.0)
    np.testing.assert_array_equal(net.layers[0].weights, first)
    np.testing.assert_array_equal(net.layers[1].weights, second)


def test_select_output():
    net = random_network([4, 6, 10], seed=0)
    s = select_output(net, 8)
    np.testing.assert_array_equal(s.u, net.layers[-1].weights[8])
    assert isinstance(s, ScalarNetwork)
    one = random_network([4, 3, 1], seed=0)
    np.testing.assert_array_equal(select_output(one, 0).u, one.layers[-1].weights[0])
    with pytest.raises(IndexError):
        select_output(net, 10)


def test_forward_example(example_net):
    np.testing.assert_allclose(forward(example_net, [1.0, 0.0]), [3.0])
    net = random_network([5, 4, 3, 2], seed=1)
    np.testing.assert_array_equal(forward(net, np.zeros(5)), np.zeros(2))
    with pytest.raises(ValueError):
        forward(example_net, [1.0, 2.0, 3.0])
    # batches of rows
    X = np.array([[1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(forward(example_net, X).ravel(), [3.0, 2.0])


def test_gradient_at_example(example_snet):
    np.testing.assert_allclose(gradient_at(example_snet, [1.0, 1.0]), [2.0, 0.0])
    # pre-activations (0, -2): zero counts as inactive, so the gradient vanishes
    np.testing.assert_array_equal(gradient_at(example_snet, [-1.0, -1.0]), [0.0, 0.0])
    # pre-activations (1, 2) at (1, 0): both active
    np.testing.assert_allclose(gradient_at(example_snet, [1.0, 0.0]), [3.0, -1.0])


def test_gradient_zero_when_all_inactive():
    s = scalar_from_weights([[[1.0, 1.0], [2.0, 1.0]]], [3.0, -1.0])
    np.testing.assert_array_equal(gradient_at(s, [-1.0, -1.0]), [0.0, 0.0])
    # exactly zero pre-activation counts as inactive
    np.testing.assert_array_equal(pattern_at(s, [0.0, 0.0])[0], [0.0, 0.0])


def test_gradient_finite_difference():
    rng = np.random.default_rng(0)
    net = random_network([6, 8, 5, 1], seed=4)
    layers = [DenseLayer(l.weights, rng.standard_normal(l.n_out) * 0.3) for l in net.layers]
    s = select_output(Network(6, tuple(layers)))
    h = 1e-5
    for _ in range(10):
        x = rng.standard_normal(6)
        g = gradient_at(s, x)
        fd = np.array([(forward(s, x + h * e) - forward(s, x - h * e))[0] / (2 * h)
                       for e in np.eye(6)])
        np.testing.assert_allclose(g, fd, atol=1e-4)


def test_gradient_for_pattern_examples(example_snet):
    np.testing.assert_allclose(gradient_for_pattern(example_snet, [np.ones(2)]), [3.0, -1.0])
    np.testing.assert_array_equal(gradient_for_pattern(example_snet, [np.zeros(2)]), [0.0, 0.0])
    single = scalar_from_weights([[[1.0]]], [1.0])
    np.testing.assert_array_equal(gradient_for_pattern(single, [np.ones(1)]), [1.0])
    with pytest.raises(ValueError):
        gradient_for_pattern(example_snet, [np.ones(3)])
    with pytest.raises(ValueError):
        gradient_for_pattern(example_snet, [np.ones(2), np.ones(2)])


def test_gradient_for_pattern_batched():
    s = select_output(random_network([4, 3, 5, 1], seed=9))
    rng = np.random.default_rng(1)
    v1 = rng.integers(0, 2, (6, 3)).astype(float)
    v2 = rng.integers(0, 2, (6, 5)).astype(float)
    batch = gradient_for_pattern(s, [v1, v2])
    for i in range(6):
        np.testing.assert_allclose(batch[i], gradient_for_pattern(s, [v1[i], v2[i]]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10.0))
def test_pattern_gradient_properties(seed, c):
    rng = np.random.default_rng(seed)
    net = random_network([4, 5, 3, 1], seed=seed)
    s = select_output(net)
    pattern = [rng.integers(0, 2, 5).astype(float), rng.integers(0, 2, 3).astype(float)]
    g = gradient_for_pattern(s, pattern)
    # bias invariance
    biased = Network(4, tuple(DenseLayer(l.weights, rng.standard_normal(l.n_out))
                              for l in net.layers))
    np.testing.assert_array_equal(gradient_for_pattern(select_output(biased), pattern), g)
    # positive scaling of the first layer
    scaled = Network(4, (DenseLayer(c * net.layers[0].weights),) + net.layers[1:])
    np.testing.assert_allclose(gradient_for_pattern(select_output(scaled), pattern), c * g,
                               rtol=1e-12, atol=1e-12)
    # permuting hidden layer 1 permutes the pattern but not the gradient
    perm = rng.permutation(5)
    W1, W2 = net.layers[0].weights, net.layers[1].weights
    permuted = Network(4, (DenseLayer(W1[perm]), DenseLayer(W2[:, perm])) + net.layers[2:])
    g2 = gradient_for_pattern(select_output(permuted), [pattern[0][perm], pattern[1]])
    np.testing.assert_allclose(g2, g, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_at_is_a_vertex_gradient(seed):
    rng = np.random.default_rng(seed)
    s = select_output(random_network([3, 4, 2, 1], seed=seed))
    x = rng.standard_normal(3)
    pattern = pattern_at(s, x)
    assert all(set(np.unique(v)) <= {0.0, 1.0} for v in pattern)
    np.testing.assert_array_equal(gradient_at(s, x), gradient_for_pattern(s, pattern))


def test_slope_bounded_forward_unsupported():
    net = Network(1, (DenseLayer([[1.0]]), DenseLayer([[1.0]])), -0.5, 1.0, "slope_bounded")
    with pytest.raises(NotImplementedError):
        forward(net, [1.0])
    # pattern-based computations only need the bounds
    s = ScalarNetwork(net)
    np.testing.assert_array_equal(gradient_for_pattern(s, [np.array([-0.5])]), [-0.5])


def test_fingerprint_stable(example_net):
    fp = example_net.fingerprint()
    assert fp["dims"] == [2, 2, 1]
    assert fp == load_network(save_network(example_net)).fingerprint()
    assert len(fp["sha256"]) == 64
