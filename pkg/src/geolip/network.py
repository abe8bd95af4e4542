"""Feed-forward networks with slope-bounded activations.

Weights follow the row-major convention ``weights[i][j]`` = coefficient from
input ``j`` to output ``i``.  A network with ``d`` layers has ``d - 1`` hidden
layers; the last layer is the output layer.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

FORMAT = "geolip-net-v1"

RELU = "relu"
PIECEWISE_LINEAR = "piecewise_linear"
SLOPE_BOUNDED = "slope_bounded"
ACTIVATION_KINDS = (RELU, PIECEWISE_LINEAR, SLOPE_BOUNDED)


class NetworkFormatError(ValueError):
    """Raised for malformed or inconsistent network documents."""


def _frozen(a, ndim: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise NetworkFormatError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NetworkFormatError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray = None

    def __post_init__(self):
        W = _frozen(self.weights, 2, "weights")
        if W.shape[0] == 0 or W.shape[1] == 0:
            raise NetworkFormatError("weights must be non-empty")
        b = np.zeros(W.shape[0]) if self.bias is None else self.bias
        b = _frozen(b, 1, "bias")
        if b.shape[0] != W.shape[0]:
            raise NetworkFormatError(
                f"bias has length {b.shape[0]} but weights have {W.shape[0]} rows")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "bias", b)

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    input_dim: int
    layers: tuple[DenseLayer, ...]
    slope_min: float = 0.0
    slope_max: float = 1.0
    activation: str = RELU

    def __post_init__(self):
        layers = tuple(
            l if isinstance(l, DenseLayer) else DenseLayer(*l) for l in self.layers)
        if not layers:
            raise NetworkFormatError("network must have at least one layer")
        if int(self.input_dim) != self.input_dim or self.input_dim < 1:
            raise NetworkFormatError("input_dim must be a positive integer")
        prev = int(self.input_dim)
        for i, layer in enumerate(layers):
            if layer.n_in != prev:
                raise NetworkFormatError(
                    f"dimension mismatch: layer {i} has {layer.n_in} columns, expected {prev}")
            prev = layer.n_out
        a, b = float(self.slope_min), float(self.slope_max)
        if not (np.isfinite(a) and np.isfinite(b)) or a > b:
            raise NetworkFormatError(f"invalid slope bounds [{a}, {b}]")
        if self.activation not in ACTIVATION_KINDS:
            raise NetworkFormatError(f"unknown activation kind {self.activation!r}")
        if self.activation == RELU and (a, b) != (0.0, 1.0):
            raise NetworkFormatError("relu requires slope bounds (0, 1)")
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "slope_min", a)
        object.__setattr__(self, "slope_max", b)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        return [self.input_dim] + [l.n_out for l in self.layers]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def hidden_sizes(self) -> list[int]:
        return [l.n_out for l in self.layers[:-1]]

    @property
    def slopes(self) -> tuple[float, float]:
        return self.slope_min, self.slope_max

    def fingerprint(self) -> dict:
        digest = hashlib.sha256(save_network(self)).hexdigest()
        return {"dims": self.dims, "sha256": digest}


@dataclass(frozen=True)
class ScalarNetwork:
    """A network with a single output; ``u`` is the final weight row."""

    base: Network

    def __post_init__(self):
        if self.base.output_dim != 1:
            raise NetworkFormatError(
                f"scalar network needs one output row, got {self.base.output_dim}")

    @property
    def u(self) -> np.ndarray:
        return self.base.layers[-1].weights[0]

    @property
    def hidden_weights(self) -> list[np.ndarray]:
        """W_1, ..., W_{d-1} (everything but the output row)."""
        return [l.weights for l in self.base.layers[:-1]]

    @property
    def input_dim(self) -> int:
        return self.base.input_dim

    @property
    def depth(self) -> int:
        return self.base.depth

    @property
    def hidden_sizes(self) -> list[int]:
        return self.base.hidden_sizes

    @property
    def slopes(self) -> tuple[float, float]:
        return self.base.slopes


# An activation pattern is a sequence of per-hidden-layer slope vectors.
ActivationPattern = Sequence[np.ndarray]


# --------------------------------------------------------------------------
# serialization


def network_to_dict(net: Network) -> dict:
    return {
        "format": FORMAT,
        "input_dim": net.input_dim,
        "activation": {"kind": net.activation, "slope_min": net.slope_min,
                       "slope_max": net.slope_max},
        "layers": [{"weights": l.weights.tolist(), "bias": l.bias.tolist()} for l in net.layers],
    }


def network_from_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be a JSON object")
    if doc.get("format") != FORMAT:
        raise NetworkFormatError(f"expected format {FORMAT!r}, got {doc.get('format')!r}")
    try:
        input_dim = doc["input_dim"]
        raw_layers = doc["layers"]
    except KeyError as exc:
        raise NetworkFormatError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(input_dim, int) or isinstance(input_dim, bool):
        raise NetworkFormatError("input_dim must be an integer")
    if not isinstance(raw_layers, list):
        raise NetworkFormatError("layers must be a list")
    act = doc.get("activation", {"kind": RELU})
    if not isinstance(act, dict):
        raise NetworkFormatError("activation must be an object")
    kind = act.get("kind", RELU)
    if kind not in ACTIVATION_KINDS:
        raise NetworkFormatError(f"unknown activation kind {kind!r}")
    layers = []
    for i, raw in enumerate(raw_layers):
        if not isinstance(raw, dict) or "weights" not in raw:
            raise NetworkFormatError(f"layer {i} must be an object with 'weights'")
        W = raw["weights"]
        if (not isinstance(W, list) or not W or not all(isinstance(r, list) for r in W)
                or len({len(r) for r in W}) != 1):
            raise NetworkFormatError(f"layer {i} weights must be a non-empty rectangular matrix")
        try:
            layers.append(DenseLayer(np.array(W, dtype=float), raw.get("bias")))
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"layer {i}: {exc}") from None
    return Network(input_dim=input_dim, layers=tuple(layers),
                   slope_min=float(act.get("slope_min", 0.0)),
                   slope_max=float(act.get("slope_max", 1.0)), activation=kind)


def load_network(data: bytes | str) -> Network:
    """Parse a ``geolip-net-v1`` JSON document."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise NetworkFormatError(f"malformed document: {exc}") from None
    return network_from_dict(doc)


def save_network(net: Network) -> bytes:
    """Serialize to UTF-8 JSON; floats round-trip bit-exactly."""
    # allow_nan=False makes tampered (non-finite) arrays fail loudly
    return json.dumps(network_to_dict(net), allow_nan=False).encode("utf-8")


def read_network(path) -> Network:
    with open(path, "rb") as fh:
        return load_network(fh.read())


def write_network(net: Network, path) -> None:
    with open(path, "wb") as fh:
        fh.write(save_network(net))


# --------------------------------------------------------------------------
# construction


def random_network(dims: Sequence[int], seed: int = 0, scale: float = 1.0) -> Network:
    """I.i.d. uniform weights on ``[-scale, scale]``, zero bias, ReLU.

    Stream discipline: a single PCG64 generator seeded with ``seed`` draws the
    weight matrices in layer order, each in row-major order.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("dims needs at least an input and an output size")
    if any(d < 1 for d in dims):
        raise ValueError("dims must be positive")
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    layers = []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        W = rng.uniform(-scale, scale, size=(n_out, n_in))
        layers.append(DenseLayer(W, np.zeros(n_out)))
    return Network(input_dim=dims[0], layers=tuple(layers))


def select_output(net: Network, index: int = 0) -> ScalarNetwork:
    """Restrict ``net`` to output coordinate ``index``."""
    if not 0 <= index < net.output_dim:
        raise IndexError(f"output index {index} out of range for {net.output_dim} outputs")
    last = net.layers[-1]
    row = DenseLayer(last.weights[index:index + 1], last.bias[index:index + 1])
    return ScalarNetwork(Network(net.input_dim, net.layers[:-1] + (row,), net.slope_min,
                                 net.slope_max, net.activation))


def with_layers(net: Network, layers: Sequence[DenseLayer]) -> Network:
    return Network(net.input_dim if not layers else layers[0].n_in, tuple(layers),
                   net.slope_min, net.slope_max, net.activation)


def scalar_from_weights(weights: Sequence, u, slopes=(0.0, 1.0)) -> ScalarNetwork:
    """Bias-free scalar network from hidden weights ``W_1..W_{d-1}`` and output row ``u``."""
    layers = [DenseLayer(np.asarray(W, dtype=float)) for W in weights]
    layers.append(DenseLayer(np.asarray(u, dtype=float).reshape(1, -1)))
    kind = RELU if tuple(slopes) == (0.0, 1.0) else PIECEWISE_LINEAR
    return ScalarNetwork(Network(layers[0].n_in, tuple(layers), slopes[0], slopes[1], kind))


# --------------------------------------------------------------------------
# evaluation


def _activate(net: Network, z: np.ndarray) -> np.ndarray:
    if net.activation == SLOPE_BOUNDED:
        raise NotImplementedError("forward evaluation needs a concrete activation")
    a, b = net.slopes
    return np.where(z > 0, b * z, a * z)


def _slope(net: Network, z: np.ndarray) -> np.ndarray:
    # derivative at exactly 0 is the lower slope (0 for ReLU)
    a, b = net.slopes
    return np.where(z > 0, b, a)


def _check_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has length {x.shape[-1]}, expected {net.input_dim}")
    return x


def forward(net: Network | ScalarNetwork, x) -> np.ndarray:
    """Network output; ``x`` may be a single vector or a batch (rows)."""
    net = net.base if isinstance(net, ScalarNetwork) else net
    h = _check_input(net, x)
    for layer in net.layers[:-1]:
        h = _activate(net, h @ layer.weights.T + layer.bias)
    last = net.layers[-1]
    return h @ last.weights.T + last.bias


def pattern_at(snet: ScalarNetwork, x) -> list[np.ndarray]:
    """Per-hidden-layer slopes realized at ``x`` (works on batches too)."""
    net = snet.base
    h = _check_input(net, x)
    pattern = []
    for layer in net.layers[:-1]:
        z = h @ layer.weights.T + layer.bias
        pattern.append(_slope(net, z))
        h = np.where(z > 0, net.slope_max * z, net.slope_min * z)
    return pattern


def gradient_for_pattern(snet: ScalarNetwork, pattern: ActivationPattern) -> np.ndarray:
    """``W_1^T diag(v_1) ... W_{d-1}^T diag(v_{d-1}) u^T``.

    Patterns may be batched: each ``v_i`` of shape ``(batch, n_i)`` gives a
    ``(batch, input_dim)`` result.
    """
    Ws = snet.hidden_weights
    if len(pattern) != len(Ws):
        raise ValueError(f"pattern has {len(pattern)} layers, network has {len(Ws)} hidden")
    vs = [np.asarray(v, dtype=float) for v in pattern]
    batched = vs[0].ndim == 2 if vs else False
    for v, W in zip(vs, Ws):
        if v.shape[-1] != W.shape[0] or v.ndim != (2 if batched else 1):
            raise ValueError(f"pattern vector of shape {v.shape} does not match layer width {W.shape[0]}")
    g = snet.u if not batched else np.broadcast_to(snet.u, (vs[0].shape[0], snet.u.size))
    for v, W in zip(reversed(vs), reversed(Ws)):
        g = (g * v) @ W
    return np.array(g)


def gradient_at(snet: ScalarNetwork, x) -> np.ndarray:
    """Gradient of the scalar network at ``x`` via the realized activation pattern."""
    return gradient_for_pattern(snet, pattern_at(snet, x))
