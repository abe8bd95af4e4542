import itertools

import numpy as np
import pytest

from geolip.baselines import CapExceededError, brute_force_fgl
from geolip.reductions import cut_norm_brute, cutnorm_to_network
from geolip.relaxations import ngeolip_linf


def naive_cut_norm(A, signed=False):
    """Double loop over both 0-1 cubes."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    best = 0.0
    for x in itertools.product([0, 1], repeat=n):
        for y in itertools.product([0, 1], repeat=m):
            val = float(np.array(y) @ A @ np.array(x))
            best = max(best, val if signed else abs(val))
    return best


def test_cut_norm_examples():
    assert cut_norm_brute([[1, -1], [-1, 1]]) == 1.0
    assert cut_norm_brute([[1.0, 2.0], [3.0, 0.5]]) == 6.5
    assert cut_norm_brute([[-1]], signed=True) == 0.0
    assert cut_norm_brute([[-1]]) == 1.0


def test_cut_norm_matches_naive():
    rng = np.random.default_rng(0)
    for shape in [(2, 3), (3, 2), (4, 4), (1, 5)]:
        A = rng.integers(-3, 4, size=shape).astype(float)
        assert cut_norm_brute(A) == naive_cut_norm(A)
        assert cut_norm_brute(A, signed=True) == naive_cut_norm(A, signed=True)


def test_cut_norm_errors():
    with pytest.raises(CapExceededError):
        cut_norm_brute(np.ones((12, 11)))
    with pytest.raises(ValueError):
        cut_norm_brute(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        cutnorm_to_network([[np.nan]])


def test_network_shape():
    A = np.arange(6.0).reshape(2, 3)
    s = cutnorm_to_network(A)
    assert s.input_dim == 3 and s.hidden_sizes == [3]
    np.testing.assert_array_equal(s.hidden_weights[0], np.vstack([A, A.sum(0)]).T)
    np.testing.assert_array_equal(s.u, np.ones(3))
    assert s.slopes == (0.0, 1.0)


@pytest.mark.parametrize("A, fgl", [
    ([[1, -1], [-1, 1]], 2.0),
    ([[0, 0], [0, 0]], 0.0),
    ([[1]], 2.0),
])
def test_reduction_examples(A, fgl):
    assert brute_force_fgl(cutnorm_to_network(A), "linf").value == fgl


def test_reduction_identity_random():
    rng = np.random.default_rng(1)
    for _ in range(30):
        m, n = rng.integers(1, 5, size=2)
        A = rng.choice([-1.0, 1.0], size=(m, n))
        assert brute_force_fgl(cutnorm_to_network(A), "linf").value == 2 * naive_cut_norm(A)


def test_grothendieck_transfer():
    rng = np.random.default_rng(2)
    for _ in range(8):
        A = rng.choice([-1.0, 1.0], size=(3, 4))
        ratio = ngeolip_linf(cutnorm_to_network(A)).value / (2 * cut_norm_brute(A))
        assert 1 - 1e-6 <= ratio <= 1.783
