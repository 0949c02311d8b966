"""0-1 big-M MILP encoding of ReLU networks.

Each hidden node (layer k, index j) gets a split t = x - s of its
pre-activation into nonnegative parts, a binary activation variable z, and
the big-M rows x <= U z and s <= -L (1 - z). The pre-activation bounds
[L, U] also induce variable boxes

    max{0, L} <= x <= max{0, U}
    max{0, -U} <= s <= max{0, -L}

which is how tightened bounds feed back into the model. Stable nodes keep
their variables: a node with L > 0 has z pinned to 1 and s to 0, a dead
node (U < 0) has z and x pinned to 0. Pinning instead of removal keeps one
binary per hidden node, so model sizes match the plain formulation while
the solver still never branches on them.

Hidden bounds must be finite before a network can be encoded; run the
interval pass in relumilp.bt first when they are not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lp import LinearModel
from .milp import MilpModel
from .net import ReluNetwork

__all__ = [
    "BoundSet",
    "RelaxSpec",
    "NetworkEmbedding",
    "embed_network",
    "relu_relaxation_upper",
    "build_problem",
    "variable_box",
    "as_box",
    "save_bounds",
    "load_bounds",
]


def as_box(box, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Normalize a box spec to (lower, upper) arrays of length n.

    A tuple is read as a (lo, hi) pair of scalars or length-n vectors.
    Anything else is coerced to an array: shape (2,) broadcasts one
    interval to every dimension, shape (n, 2) gives per-dimension rows.
    """
    if isinstance(box, tuple) and len(box) == 2:
        lo = np.asarray(box[0], dtype=float)
        hi = np.asarray(box[1], dtype=float)
        if lo.ndim == 0:
            lo = np.full(n, float(lo))
        if hi.ndim == 0:
            hi = np.full(n, float(hi))
        lo, hi = lo.copy(), hi.copy()
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError(f"box pair has shapes {lo.shape}/{hi.shape}, expected ({n},)")
    else:
        arr = np.asarray(box, dtype=float)
        if arr.shape == (2,):
            lo = np.full(n, arr[0])
            hi = np.full(n, arr[1])
        elif arr.shape == (n, 2):
            lo, hi = arr[:, 0].copy(), arr[:, 1].copy()
        else:
            raise ValueError(f"cannot interpret box of shape {arr.shape} for n={n}")
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise ValueError("box bounds may not be NaN")
    if np.any(lo > hi):
        raise ValueError("box has lower > upper")
    return lo, hi


class BoundSet:
    """Per-node pre-activation intervals for every layer 0..K."""

    def __init__(self, lower: list[np.ndarray], upper: list[np.ndarray]):
        if len(lower) != len(upper):
            raise ValueError("lower/upper layer counts differ")
        self.lower = [np.atleast_1d(np.asarray(lo, dtype=float)).copy() for lo in lower]
        self.upper = [np.atleast_1d(np.asarray(hi, dtype=float)).copy() for hi in upper]
        for k, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo.shape != hi.shape:
                raise ValueError(f"layer {k}: lower/upper shapes differ")
            if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
                raise ValueError(f"layer {k}: NaN bound")
            if np.any(lo > hi):
                raise ValueError(f"layer {k}: lower exceeds upper")

    @classmethod
    def unbounded(cls, layer_dims) -> "BoundSet":
        dims = tuple(layer_dims)
        return cls([np.full(d, -np.inf) for d in dims], [np.full(d, np.inf) for d in dims])

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return tuple(lo.shape[0] for lo in self.lower)

    @property
    def num_layers(self) -> int:
        return len(self.lower)

    def copy(self) -> "BoundSet":
        return BoundSet(self.lower, self.upper)

    def matches(self, net: ReluNetwork) -> bool:
        return self.layer_dims == net.layer_dims

    def hidden_finite(self) -> bool:
        return all(np.isfinite(self.lower[k]).all() and np.isfinite(self.upper[k]).all()
                   for k in range(1, self.num_layers - 1))

    def spans(self) -> list[np.ndarray]:
        return [hi - lo for lo, hi in zip(self.lower, self.upper)]


def save_bounds(bounds: BoundSet) -> bytes:
    doc = {"layers": [{"L": lo.tolist(), "U": hi.tolist()}
                      for lo, hi in zip(bounds.lower, bounds.upper)]}
    return json.dumps(doc).encode("utf-8")


def load_bounds(data: bytes) -> BoundSet:
    try:
        doc = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValueError(f"malformed bounds document: {exc}") from exc
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ValueError("bounds document needs a nonempty 'layers' list")
    lower = [np.array(layer["L"], dtype=float) for layer in layers]
    upper = [np.array(layer["U"], dtype=float) for layer in layers]
    return BoundSet(lower, upper)


@dataclass(frozen=True)
class RelaxSpec:
    """Which parts of the encoding to relax.

    relu_relaxed nodes keep their constraints but get a continuous
    activation variable z in [0, 1]; removed nodes contribute no variables
    or constraints at all. Node ids are (layer, index), zero-based.
    Removal must be suffix-closed: once any node of a layer is removed,
    every later layer must be removed entirely, otherwise the next affine
    map could not be written down.
    """

    relu_relaxed: frozenset = frozenset()
    removed: frozenset = frozenset()

    @classmethod
    def exact(cls) -> "RelaxSpec":
        return cls()

    @classmethod
    def all_relaxed(cls, net: ReluNetwork) -> "RelaxSpec":
        nodes = {(k, j) for k in range(1, net.depth) for j in range(net.layer_dims[k])}
        return cls(relu_relaxed=frozenset(nodes))


@dataclass
class NetworkEmbedding:
    """Variable-name maps tying one network into a model."""

    prefix: str
    input_vars: list[str]
    output_vars: list[str]
    x: dict = field(default_factory=dict)  # (layer, node) -> var name
    s: dict = field(default_factory=dict)
    z: dict = field(default_factory=dict)

    def t_coeffs(self, layer: int, node: int, num_layers: int) -> dict[str, float]:
        """Objective coefficients selecting the pre-activation of one node."""
        if layer == 0 or layer == num_layers - 1:
            return {self.x[layer, node]: 1.0}
        return {self.x[layer, node]: 1.0, self.s[layer, node]: -1.0}


def variable_box(lower: float, upper: float) -> tuple[float, float, float, float]:
    """Boxes (x_lo, x_hi, s_lo, s_hi) induced by pre-activation bounds."""
    return (max(0.0, lower), max(0.0, upper), max(0.0, -upper), max(0.0, -lower))


def relu_relaxation_upper(pre: float, lower: float, upper: float) -> float:
    """Upper envelope U (pre - L) / (U - L) of the relaxed ReLU output.

    Only defined for genuinely unstable nodes with L < 0 < U; stable nodes
    should be pinned instead of relaxed.
    """
    if not (lower < 0.0 < upper):
        raise ValueError(f"relaxation needs L < 0 < U, got [{lower}, {upper}]")
    return upper * (pre - lower) / (upper - lower)


def _check_removed(net: ReluNetwork, removed: frozenset) -> list[bool]:
    """Validate suffix-closed removal; returns per-layer fully-removed flags."""
    dims = net.layer_dims
    K = net.depth
    for (k, j) in removed:
        if not (1 <= k <= K) or not (0 <= j < dims[k]):
            raise ValueError(f"removed node {(k, j)} outside the network")
    layer_removed = [False] * (K + 1)
    touched = []
    for k in range(1, K + 1):
        gone = {j for (kk, j) in removed if kk == k}
        layer_removed[k] = len(gone) == dims[k]
        if gone:
            touched.append(k)
    # Once a layer loses any node, everything above it must go entirely.
    if touched:
        for k in range(touched[0] + 1, K + 1):
            if not layer_removed[k]:
                raise ValueError(
                    f"layer {touched[0]} has removed nodes, so layer {k} must "
                    f"be removed entirely")
    return layer_removed


def embed_network(
    model: MilpModel,
    net: ReluNetwork,
    bounds: BoundSet,
    relax: RelaxSpec | None = None,
    input_vars: list[str] | None = None,
    output_vars: list[str] | None = None,
    prefix: str = "net0",
) -> NetworkEmbedding:
    """Add the big-M encoding of a network to a model.

    input_vars / output_vars may name existing model variables to share;
    their bounds are intersected with the network's layer-0 / layer-K
    boxes. Returns the embedding with all variable-name maps.
    """
    relax = relax or RelaxSpec()
    if not bounds.matches(net):
        raise ValueError(f"bounds dims {bounds.layer_dims} != net dims {net.layer_dims}")
    dims = net.layer_dims
    K = net.depth
    base = model.base
    layer_removed = _check_removed(net, relax.removed)
    hidden = {(k, j) for k in range(1, K) for j in range(dims[k])}
    stray = set(relax.relu_relaxed) - hidden
    if stray:
        raise ValueError(f"relu_relaxed contains non-hidden nodes {sorted(stray)}")

    emb = NetworkEmbedding(prefix=prefix, input_vars=[], output_vars=[])

    def intersect_bounds(name: str, lo: float, hi: float) -> None:
        i = base.var_index(name)
        new_lo = max(base.lower[i], lo)
        new_hi = min(base.upper[i], hi)
        if new_lo > new_hi + 1e-12:
            raise ValueError(f"empty bound intersection on shared variable {name!r}")
        base.set_bounds(name, new_lo, min(new_hi, max(new_lo, new_hi)))

    # Layer 0: the input box.
    if input_vars is not None:
        if len(input_vars) != dims[0]:
            raise ValueError(f"expected {dims[0]} input variables, got {len(input_vars)}")
        for j, name in enumerate(input_vars):
            if not base.has_variable(name):
                raise ValueError(f"input variable {name!r} does not exist")
            intersect_bounds(name, bounds.lower[0][j], bounds.upper[0][j])
            emb.x[0, j] = name
    else:
        for j in range(dims[0]):
            name = base.add_variable(f"{prefix}_x_0_{j}",
                                     bounds.lower[0][j], bounds.upper[0][j])
            emb.x[0, j] = name
    emb.input_vars = [emb.x[0, j] for j in range(dims[0])]

    for k in range(1, K):
        if layer_removed[k]:
            continue
        w, b = net.weights[k - 1], net.biases[k - 1]
        for j in range(dims[k]):
            if (k, j) in relax.removed:
                continue
            lo, hi = float(bounds.lower[k][j]), float(bounds.upper[k][j])
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(
                    f"hidden node ({k}, {j}) of {prefix!r} has infinite bounds "
                    f"[{lo}, {hi}]; tighten first")
            x_lo, x_hi, s_lo, s_hi = variable_box(lo, hi)
            xn = base.add_variable(f"{prefix}_x_{k}_{j}", x_lo, x_hi)
            sn = base.add_variable(f"{prefix}_s_{k}_{j}", s_lo, s_hi)
            if lo > 0.0:
                zn = base.add_variable(f"{prefix}_z_{k}_{j}", 1.0, 1.0)
            elif hi < 0.0:
                zn = base.add_variable(f"{prefix}_z_{k}_{j}", 0.0, 0.0)
            else:
                zn = base.add_variable(f"{prefix}_z_{k}_{j}", 0.0, 1.0)
            if (k, j) not in relax.relu_relaxed:
                model.mark_binary(zn)
            emb.x[k, j] = xn
            emb.s[k, j] = sn
            emb.z[k, j] = zn

            coeffs = {emb.x[k - 1, i]: float(w[j, i])
                      for i in range(dims[k - 1]) if w[j, i] != 0.0}
            coeffs[xn] = coeffs.get(xn, 0.0) - 1.0
            coeffs[sn] = 1.0
            base.add_constraint(coeffs, "=", -float(b[j]))
            if not (lo > 0.0 or hi < 0.0):
                # x <= U z and s <= -L (1 - z); for stable nodes the variable
                # boxes already say the same thing.
                base.add_constraint({xn: 1.0, zn: -hi}, "<=", 0.0)
                base.add_constraint({sn: 1.0, zn: -lo}, "<=", -lo)

    if not layer_removed[K]:
        w, b = net.weights[K - 1], net.biases[K - 1]
        kept = [j for j in range(dims[K]) if (K, j) not in relax.removed]
        if output_vars is not None:
            if len(kept) != dims[K]:
                raise ValueError("cannot wire output variables onto a partially "
                                 "removed output layer")
            if len(output_vars) != dims[K]:
                raise ValueError(f"expected {dims[K]} output variables, got {len(output_vars)}")
            for j, name in enumerate(output_vars):
                if not base.has_variable(name):
                    raise ValueError(f"output variable {name!r} does not exist")
                intersect_bounds(name, bounds.lower[K][j], bounds.upper[K][j])
                emb.x[K, j] = name
        else:
            for j in kept:
                name = base.add_variable(f"{prefix}_x_{K}_{j}",
                                         bounds.lower[K][j], bounds.upper[K][j])
                emb.x[K, j] = name
        for j in kept:
            coeffs = {emb.x[K - 1, i]: float(w[j, i])
                      for i in range(dims[K - 1]) if w[j, i] != 0.0}
            name = emb.x[K, j]
            coeffs[name] = coeffs.get(name, 0.0) - 1.0
            base.add_constraint(coeffs, "=", -float(b[j]))
        emb.output_vars = [emb.x[K, j] for j in kept]

    return emb


def build_problem(
    nets,
    extra_vars=(),
    extra_constraints=(),
    objective: dict[str, float] | None = None,
    maximize: bool = False,
) -> tuple[MilpModel, list[NetworkEmbedding]]:
    """Compose several network embeddings and user constraints in one model.

    nets is a sequence of (net, bounds, relax, wiring) tuples where wiring
    is a dict with optional "input_vars" / "output_vars" name lists (use it
    to share variables between embeddings). extra_vars are (name, lo, hi)
    triples created before any embedding so wiring can reference them;
    extra_constraints are (coeffs, relation, rhs) triples added afterwards.
    """
    base = LinearModel()
    model = MilpModel(base)
    for name, lo, hi in extra_vars:
        base.add_variable(name, lo, hi)
    embeddings = []
    for i, spec in enumerate(nets):
        net, bounds, relax, wiring = spec
        wiring = wiring or {}
        emb = embed_network(
            model, net, bounds, relax,
            input_vars=wiring.get("input_vars"),
            output_vars=wiring.get("output_vars"),
            prefix=wiring.get("prefix", f"net{i}"),
        )
        embeddings.append(emb)
    for coeffs, relation, rhs in extra_constraints:
        base.add_constraint(coeffs, relation, rhs)
    if objective is not None:
        base.set_objective(objective, maximize=maximize)
    return model, embeddings
