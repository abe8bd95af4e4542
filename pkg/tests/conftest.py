import itertools

import numpy as np
import pytest

from geolip.network import load_network, scalar_from_weights

EXAMPLE_DOC = b"""{ "format": "geolip-net-v1",
  "input_dim": 2,
  "activation": {"kind": "relu", "slope_min": 0.0, "slope_max": 1.0},
  "layers": [
    {"weights": [[1.0, -1.0], [2.0, 0.0]], "bias": [0.0, 0.0]},
    {"weights": [[1.0, 1.0]],              "bias": [0.0]} ] }"""


@pytest.fixture
def example_doc():
    return EXAMPLE_DOC


@pytest.fixture
def example_net():
    return load_network(EXAMPLE_DOC)


@pytest.fixture
def example_snet():
    return scalar_from_weights([[[1.0, -1.0], [2.0, 0.0]]], [1.0, 1.0])


def naive_fgl(weights, u, q, slopes=(0.0, 1.0)):
    """FGL by explicit products over itertools patterns (independent of the library)."""
    weights = [np.asarray(W, dtype=float) for W in weights]
    u = np.asarray(u, dtype=float)
    sizes = [W.shape[0] for W in weights]
    best = 0.0
    for combo in itertools.product(slopes, repeat=sum(sizes)):
        v = np.array(combo)
        g = u.copy()
        off = sum(sizes)
        for W, n in zip(reversed(weights), reversed(sizes)):
            off -= n
            g = (g * v[off:off + n]) @ W
        best = max(best, float(np.linalg.norm(g, q)))
    return best


def random_two_layer(rng, m, n):
    W = rng.uniform(-1, 1, size=(n, m))
    u = rng.uniform(-1, 1, size=n)
    return scalar_from_weights([W], u)


# filled by test_acceptance.py, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
