import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolip.network import (DenseLayer, Network, random_network, scalar_from_weights,
                            select_output)
from geolip.relaxations import (L2, LINF, CubeLift, DepthError, build_matrix_A,
                                dgeolip_linf_2layer, dgeolip_linf_multilayer, lipsdp_l2_2layer,
                                lipsdp_l2_multilayer, ngeolip_l2, ngeolip_linf)

from conftest import naive_fgl, random_two_layer

K_G = 1.783
SQRT_HALF_PI = math.sqrt(math.pi / 2)
ALL_METHODS = [ngeolip_linf, ngeolip_l2, dgeolip_linf_2layer, dgeolip_linf_multilayer,
               lipsdp_l2_2layer, lipsdp_l2_multilayer]


def test_build_matrix_A(example_snet):
    np.testing.assert_array_equal(build_matrix_A(example_snet), [[1, 2], [-1, 0]])
    zero_u = scalar_from_weights([[[1.0, -1.0], [2.0, 0.0]]], [0.0, 0.0])
    np.testing.assert_array_equal(build_matrix_A(zero_u), np.zeros((2, 2)))
    np.testing.assert_array_equal(build_matrix_A(scalar_from_weights([[[1.0]]], [1.0])), [[1.0]])
    with pytest.raises(DepthError):
        build_matrix_A(select_output(random_network([2, 2, 2, 1])))


@pytest.mark.parametrize("method", ALL_METHODS, ids=lambda f: f.__name__)
def test_single_neuron_is_one(method):
    est = method(scalar_from_weights([[[1.0]]], [1.0]))
    assert est.ok and est.direction == "upper"
    assert abs(est.value - 1.0) < 1e-6


def test_example_ranges(example_snet):
    v = ngeolip_linf(example_snet).value
    assert 4 - 1e-6 <= v <= 4 * K_G
    v = ngeolip_l2(example_snet).value
    assert math.sqrt(10) - 1e-6 <= v <= math.sqrt(10) * SQRT_HALF_PI
    assert abs(dgeolip_linf_2layer(example_snet).value - ngeolip_linf(example_snet).value) < 1e-6
    assert abs(lipsdp_l2_2layer(example_snet).value - ngeolip_l2(example_snet).value) < 1e-6


@pytest.mark.parametrize("method", ALL_METHODS, ids=lambda f: f.__name__)
def test_zero_network(method):
    est = method(scalar_from_weights([np.zeros((3, 4))], np.zeros(3)))
    assert est.ok and est.value == pytest.approx(0.0, abs=1e-7) and est.value >= 0


def test_primal_needs_relu_and_two_layers():
    leaky = scalar_from_weights([[[1.0]]], [1.0], slopes=(0.1, 1.0))
    with pytest.raises(ValueError):
        ngeolip_linf(leaky)
    deep = select_output(random_network([2, 3, 3, 1]))
    with pytest.raises(DepthError):
        ngeolip_l2(deep)
    with pytest.raises(DepthError):
        dgeolip_linf_2layer(deep)
    with pytest.raises(DepthError):
        lipsdp_l2_multilayer(select_output(Network(2, (DenseLayer(np.ones((1, 2))),))))


def _pm1(k):
    return np.array(list(itertools.product([-1.0, 1.0], repeat=k)))


@pytest.mark.parametrize("n", [1, 3, 6, 10])
def test_cube_lift_identity(n):
    rng = np.random.default_rng(n)
    A = rng.standard_normal((3, n))
    Y = np.array(list(itertools.product([0.0, 1.0], repeat=n)))
    # l_inf: max_y ||A y||_1 = 1/2 max over the lifted +-1 cube
    lift = CubeLift(A, LINF)
    Z = _pm1(lift.dim)
    direct = np.abs(Y @ A.T).sum(axis=1).max()
    lifted = 0.5 * np.einsum("ij,jk,ik->i", Z, lift.cost(), Z).max()
    assert abs(direct - lifted) < 1e-9
    # l_2: max_y ||A y||^2 = 1/4 max of the lifted quadratic form
    lift2 = CubeLift(A, L2)
    Z = _pm1(lift2.dim)
    direct = ((Y @ A.T) ** 2).sum(axis=1).max()
    lifted = 0.25 * np.einsum("ij,jk,ik->i", Z, lift2.lifted, Z).max()
    assert abs(direct - lifted) < 1e-9


def test_cube_lift_points_and_psd():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 5))
    lift = CubeLift(A, L2)
    assert lift.lifted.shape == (6, 6)
    assert np.linalg.eigvalsh(lift.lifted)[0] > -1e-12
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0])
    z = lift.lift_point(y)
    np.testing.assert_array_equal(lift.cube_point(z), y)
    np.testing.assert_array_equal(lift.cube_point(-z), y)
    assert abs(0.25 * z @ lift.lifted @ z - np.linalg.norm(A @ y) ** 2) < 1e-12
    linf = CubeLift(A, LINF)
    z = linf.lift_point(y)
    assert z.size == linf.dim == 5 + 1 + 4
    assert abs(0.5 * z @ linf.cost() @ z - linf.cube_objective(y)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 8), st.integers(2, 8))
def test_two_layer_dominance_and_guarantees(seed, m, n):
    s = random_two_layer(np.random.default_rng(seed), m, n)
    W, u = s.hidden_weights[0], s.u
    f1, f2 = naive_fgl([W], u, 1), naive_fgl([W], u, 2)
    p1, p2 = ngeolip_linf(s).value, ngeolip_l2(s).value
    assert f1 - 1e-6 * f1 <= p1 <= K_G * f1 + 1e-6
    assert f2 - 1e-6 * f2 <= p2 <= SQRT_HALF_PI * f2 + 1e-6
    d1, d2 = dgeolip_linf_2layer(s).value, lipsdp_l2_2layer(s).value
    assert abs(p1 - d1) <= max(1e-6, 1e-3 * p1)
    assert abs(p2 - d2) <= max(1e-6, 1e-3 * p2)


@pytest.mark.parametrize("seed", range(4))
def test_multilayer_specializes(seed):
    s = random_two_layer(np.random.default_rng(100 + seed), 5, 6)
    a, b = dgeolip_linf_2layer(s).value, dgeolip_linf_multilayer(s).value
    assert abs(a - b) <= 1e-4 * a
    a, b = lipsdp_l2_2layer(s).value, lipsdp_l2_multilayer(s).value
    assert abs(a - b) <= 1e-4 * a


@pytest.mark.parametrize("seed", range(4))
def test_multilayer_dominates_brute_force(seed):
    s = select_output(random_network([5, 4, 5, 1], seed=seed))
    Ws, u = s.hidden_weights, s.u
    assert dgeolip_linf_multilayer(s).value >= naive_fgl(Ws, u, 1) * (1 - 1e-6)
    assert lipsdp_l2_multilayer(s).value >= naive_fgl(Ws, u, 2) * (1 - 1e-6)


def test_multilayer_general_slopes_dominate():
    rng = np.random.default_rng(5)
    Ws = [rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (3, 4))]
    u = rng.uniform(-1, 1, 3)
    s = scalar_from_weights(Ws, u, slopes=(-0.2, 0.9))
    assert dgeolip_linf_multilayer(s).value >= naive_fgl(Ws, u, 1, (-0.2, 0.9)) * (1 - 1e-6)
    assert lipsdp_l2_multilayer(s).value >= naive_fgl(Ws, u, 2, (-0.2, 0.9)) * (1 - 1e-6)


def test_identity_like_three_layer():
    s = scalar_from_weights([np.eye(3), np.eye(3)], [1.0, 0.0, 0.0])
    assert lipsdp_l2_multilayer(s).value >= 1 - 1e-6
    assert dgeolip_linf_multilayer(s).value >= 1 - 1e-6


def _scaled(s, c, layer=0):
    layers = list(s.base.layers)
    l = layers[layer]
    layers[layer] = DenseLayer(c * l.weights, l.bias)
    return select_output(Network(s.input_dim, tuple(layers), *s.slopes, s.base.activation))


def _biased(s, rng):
    layers = tuple(DenseLayer(l.weights, rng.standard_normal(l.n_out)) for l in s.base.layers)
    return select_output(Network(s.input_dim, layers, *s.slopes, s.base.activation))


@pytest.mark.parametrize("method", ALL_METHODS, ids=lambda f: f.__name__)
def test_scale_and_bias_invariance(method):
    rng = np.random.default_rng(8)
    s = random_two_layer(rng, 4, 5)
    v = method(s).value
    for c in (0.25, 3.0):
        assert abs(method(_scaled(s, c)).value - c * v) <= 1e-5 * c * v
    assert abs(method(_biased(s, rng)).value - v) <= 1e-9 * v
