"""Fully connected ReLU networks: data model, evaluation, init, metrics, I/O.

A network with layer sizes (n_0, ..., n_K) applies K affine maps; the first
K-1 are followed by a componentwise max{0, .} and the last is left affine.
All evaluation routines are pure and the parameter arrays are frozen, so a
network can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ReluNetwork",
    "LabeledDataset",
    "forward",
    "forward_batch",
    "forward_trace",
    "he_initialize",
    "mape",
    "save_network",
    "load_network",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReluNetwork:
    """Parameters of a dense ReLU network.

    weights[k] has shape (n_{k+1}, n_k): row j holds the weights into node j
    of layer k+1. biases[k] has shape (n_{k+1},).
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ValueError("network needs at least an input and an output layer")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer sizes must be >= 1, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ValueError("number of parameter pairs must equal number of layers")
        ws, bs = [], []
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.atleast_2d(np.asarray(w, dtype=float))
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if w.shape != (dims[k + 1], dims[k]):
                raise ValueError(
                    f"layer {k + 1}: weight shape {w.shape} != {(dims[k + 1], dims[k])}"
                )
            if b.shape != (dims[k + 1],):
                raise ValueError(f"layer {k + 1}: bias shape {b.shape} != {(dims[k + 1],)}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k + 1}: parameters must be finite")
            ws.append(_frozen(w))
            bs.append(_frozen(b))
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def depth(self) -> int:
        """Number of affine layers K."""
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def hidden_dims(self) -> tuple[int, ...]:
        return self.layer_dims[1:-1]

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class LabeledDataset:
    """Input/target sample pairs; inputs is (N, n_0), targets is (N, n_K)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "inputs", _frozen(x))
        object.__setattr__(self, "targets", _frozen(y))

    def __len__(self) -> int:
        return self.inputs.shape[0]


def _check_input(net: ReluNetwork, x0: np.ndarray) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (net.input_dim,):
        raise ValueError(f"input shape {x0.shape} != ({net.input_dim},)")
    if not np.isfinite(x0).all():
        raise ValueError("input entries must be finite")
    return x0


def forward(net: ReluNetwork, x0: np.ndarray) -> np.ndarray:
    """Evaluate the network at a single input vector."""
    x = _check_input(net, x0)
    last = net.depth - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = w @ x + b
        if k < last:
            x = np.maximum(0.0, x)
    return x


def forward_batch(net: ReluNetwork, x0: np.ndarray) -> np.ndarray:
    """Evaluate the network at a batch of inputs, shape (N, n_0) -> (N, n_K)."""
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    if x.shape[1] != net.input_dim:
        raise ValueError(f"input width {x.shape[1]} != {net.input_dim}")
    last = net.depth - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w.T + b
        if k < last:
            x = np.maximum(0.0, x)
    return x


def forward_trace(net: ReluNetwork, x0: np.ndarray) -> list[np.ndarray]:
    """Per-layer pre-activation values.

    Returns one vector per layer 0..K: the input itself for layer 0, the
    affine value before the ReLU for hidden layers, and the output for
    layer K. The last entry therefore equals forward(net, x0).
    """
    x = _check_input(net, x0)
    trace = [x.copy()]
    last = net.depth - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        pre = w @ x + b
        trace.append(pre)
        x = np.maximum(0.0, pre) if k < last else pre
    return trace


def he_initialize(layer_dims, seed: int) -> ReluNetwork:
    """Random network with weights ~ N(0, 2/fan_in) and zero biases.

    With standard-normal inputs this keeps the per-layer activation variance
    roughly constant, so the output stays O(1) regardless of depth.
    """
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return ReluNetwork(dims, weights, biases)


def mape(net: ReluNetwork, data: LabeledDataset, zero_targets: str = "error") -> float:
    """Mean absolute percentage error, 100 * mean |y - yhat| / |y|.

    The mean runs over all sample/output entries. Entries with y == 0 are
    rejected (zero_targets="error") or dropped (zero_targets="exclude").
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if zero_targets not in ("error", "exclude"):
        raise ValueError(f"unknown zero_targets mode {zero_targets!r}")
    pred = forward_batch(net, data.inputs)
    y = data.targets
    mask = y != 0.0
    if not mask.all():
        if zero_targets == "error":
            raise ValueError("dataset has zero target entries; pass zero_targets='exclude'")
        if not mask.any():
            raise ValueError("all target entries are zero")
    rel = np.abs(y[mask] - pred[mask]) / np.abs(y[mask])
    return 100.0 * float(rel.mean())


def save_network(net: ReluNetwork) -> bytes:
    """Serialize to a UTF-8 JSON document; load_network inverts it exactly."""
    doc = {
        "layer_dims": list(net.layer_dims),
        "layers": [
            {"W": w.tolist(), "b": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    return json.dumps(doc).encode("utf-8")


def load_network(data: bytes) -> ReluNetwork:
    """Parse a network document, validating shapes and finiteness."""
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"malformed network document: {exc}") from exc
    if not isinstance(doc, dict) or "layer_dims" not in doc or "layers" not in doc:
        raise ValueError("network document needs 'layer_dims' and 'layers'")
    dims = doc["layer_dims"]
    layers = doc["layers"]
    if not isinstance(layers, list) or len(layers) != len(dims) - 1:
        raise ValueError("number of layers inconsistent with layer_dims")
    weights, biases = [], []
    for k, layer in enumerate(layers):
        w = layer.get("W")
        b = layer.get("b")
        if w is None or b is None:
            raise ValueError(f"layer {k + 1}: missing 'W' or 'b'")
        rows = [len(r) for r in w]
        if len(set(rows)) > 1:
            raise ValueError(f"layer {k + 1}: ragged weight rows {rows}")
        weights.append(np.array(w, dtype=float))
        biases.append(np.array(b, dtype=float))
    # ReluNetwork validation covers shapes vs dims and NaN/Inf rejection.
    return ReluNetwork(tuple(dims), weights, biases)
