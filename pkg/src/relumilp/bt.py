"""Bound tightening for encoded ReLU networks.

Five procedures of increasing strength compute valid pre-activation
intervals for every node, given an input box and (optionally) an output
box:

    lrr      interval arithmetic, forward only
    rr       LP over the fully ReLU-relaxed network
    lr       MILP over layers up to the node, siblings and deeper layers
             dropped (forward only)
    semi-rr  MILP over the full network with ReLUs from the node's layer
             onward relaxed
    no-r     MILP over the full, unrelaxed network

All optimization-based procedures start from the interval bounds and sweep
the layers in ascending order, nodes by index, maximizing and minimizing
each node's pre-activation over the procedure's constraint set. The
constraint set is rebuilt from the current bounds before every node, so
earlier tightenings (including pinned activations) immediately shrink
later subproblems. A new bound is accepted only when it improves the
current one, which keeps the interval set monotonically valid even when
time-limited subproblems return loose dual bounds.

The output box enters the subproblems as extra constraints on the output
variables, never as a constraint on the node being tightened itself: the
reported bound of a node is what the optimization proves about it, not the
imposed box. Forward-only procedures (lrr, lr) consequently never see the
output box at all.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field

import numpy as np

from .encode import BoundSet, RelaxSpec, as_box, embed_network, variable_box
from .lp import LpParams
from .milp import (
    MILP_INFEASIBLE,
    MILP_OPTIMAL,
    MilpModel,
    SolveParams,
    solve_milp,
)
from .lp import LinearModel
from .net import ReluNetwork

__all__ = [
    "BtScheme",
    "BtParams",
    "BtReport",
    "BbpAnalysis",
    "InfeasibleNetworkError",
    "SCHEME_KINDS",
    "parse_scheme",
    "interval_bounds",
    "tighten",
    "mad",
    "mrd",
    "bbp_threshold",
]

SCHEME_KINDS = ("lrr", "rr", "lr", "semi-rr", "no-r")
_MILP_KINDS = ("lr", "semi-rr", "no-r")
_BBP_KINDS = ("rr", "semi-rr", "no-r")  # these may start at the input layer


class InfeasibleNetworkError(ValueError):
    """The box constraints admit no feasible input/output pair."""

    def __init__(self, layer: int, node: int, message: str = ""):
        self.layer = layer
        self.node = node
        super().__init__(
            message or f"tightening subproblem at node (layer {layer}, index {node}) "
                       f"is infeasible; the boxes admit no solution")


@dataclass(frozen=True)
class BtScheme:
    kind: str
    subproblem_time_limit: float | None = None
    rounds: int = 1

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}, expected one of {SCHEME_KINDS}")
        if self.subproblem_time_limit is not None:
            if self.kind not in _MILP_KINDS:
                raise ValueError(
                    f"subproblem time limit only applies to MILP schemes {_MILP_KINDS}")
            if self.subproblem_time_limit <= 0:
                raise ValueError("subproblem time limit must be positive")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")

    def label(self) -> str:
        if self.subproblem_time_limit is None:
            return self.kind
        limit = self.subproblem_time_limit
        text = f"{limit:g}"
        return f"{self.kind}({text})"


_SCHEME_RE = re.compile(r"^(lrr|rr|lr|semi-rr|no-r)(?:\((\d+(?:\.\d+)?)\))?$")


def parse_scheme(text: str, rounds: int = 1) -> BtScheme:
    """Parse scheme strings like "lrr", "rr", "no-r(60)", "lr(0.5)"."""
    m = _SCHEME_RE.match(text.strip().lower())
    if not m:
        raise ValueError(
            f"cannot parse scheme {text!r}; expected one of {SCHEME_KINDS} with an "
            f"optional (seconds) suffix on the MILP schemes")
    limit = float(m.group(2)) if m.group(2) is not None else None
    return BtScheme(m.group(1), limit, rounds)


@dataclass
class BtParams:
    gap_tolerance: float = 0.0  # subproblems are solved to proven optimality
    integrality_tolerance: float = 1e-6
    lp: LpParams = field(default_factory=LpParams)
    optimal_reference: BoundSet | None = None


@dataclass
class BtReport:
    scheme: str
    bounds: BoundSet
    total_time: float
    node_times: dict
    dead_neuron_fraction: float
    fixed_active_fraction: float
    unstable_fraction: float
    mad: float
    mrd: float | None
    subproblem_timeouts: int


@dataclass
class BbpAnalysis:
    """How much output-bound tightening one affine node needs to feel it."""

    delta_threshold: float
    delta_param: float
    delta_relative: float


def mad(bounds: BoundSet) -> float:
    """Mean absolute distance: sum over layers of the mean bound width."""
    total = 0.0
    for k, (lo, hi) in enumerate(zip(bounds.lower, bounds.upper)):
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError(f"layer {k} has infinite bounds")
        total += float(np.abs(hi - lo).mean())
    return total


def mrd(b: BoundSet, b_star: BoundSet, b_minus: BoundSet) -> float:
    """Relative tightness of b between optimal b_star and initial b_minus.

    100 * |MAD(b) - MAD(b*)| / |MAD(b-) - MAD(b*)|, defined as zero when
    the denominator vanishes.
    """
    if not (b.layer_dims == b_star.layer_dims == b_minus.layer_dims):
        raise ValueError("bound sets have different shapes")
    m, m_star, m_minus = mad(b), mad(b_star), mad(b_minus)
    denom = abs(m_minus - m_star)
    if denom == 0.0:
        return 0.0
    return 100.0 * abs(m - m_star) / denom


def bbp_threshold(w: np.ndarray, node_bounds, j: int) -> BbpAnalysis:
    """Backward-propagation threshold for node j of y = w . x + b.

    delta_threshold is the output-bound change below which the bound on
    x_j cannot move; delta_param is the node's share of the total weighted
    span, and delta_relative = 1 - delta_param expresses the threshold as
    a fraction of the forward bound width.
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative (flip signs into the bounds)")
    lo, hi = as_box(node_bounds, w.shape[0])
    if not (0 <= j < w.shape[0]):
        raise ValueError(f"node index {j} out of range")
    spans = w * (hi - lo)
    denom = float(spans.sum())
    threshold = denom - float(spans[j])
    delta = 1.0 if denom == 0.0 else float(spans[j]) / denom
    return BbpAnalysis(delta_threshold=threshold, delta_param=delta,
                       delta_relative=1.0 - delta)


def interval_bounds(net: ReluNetwork, input_box) -> BoundSet:
    """Forward interval arithmetic pre-activation bounds (the lrr scheme).

    For layers past the first, predecessor intervals pass through the ReLU
    clamp before the weighted sum; the first hidden layer uses the raw
    input box. The output box, when one exists, plays no role here.
    """
    lo0, hi0 = as_box(input_box, net.input_dim)
    if not (np.isfinite(lo0).all() and np.isfinite(hi0).all()):
        raise ValueError("input box must be finite")
    lower = [lo0.copy()]
    upper = [hi0.copy()]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        if k == 0:
            xl, xu = lower[0], upper[0]
        else:
            xl, xu = np.maximum(0.0, lower[k]), np.maximum(0.0, upper[k])
        at_upper = w * xu
        at_lower = w * xl
        upper.append(np.maximum(at_upper, at_lower).sum(axis=1) + b)
        lower.append(np.minimum(at_upper, at_lower).sum(axis=1) + b)
    return BoundSet(lower, upper)


def _subproblem_model(net, bounds, E, kind, layer, node):
    """Build the constraint set for tightening one node, per scheme kind.

    Returns (MilpModel, objective coefficient dict). The output box E is
    applied to every output variable except the target node itself.
    """
    K = net.depth
    dims = net.layer_dims
    if kind == "lr":
        removed = {(layer, i) for i in range(dims[layer]) if i != node}
        for m in range(layer + 1, K + 1):
            removed |= {(m, i) for i in range(dims[m])}
        relax = RelaxSpec(removed=frozenset(removed))
        E = None
    elif kind == "rr":
        relax = RelaxSpec.all_relaxed(net)
    elif kind == "semi-rr":
        nodes = {(k, j) for k in range(max(layer, 1), K) for j in range(dims[k])}
        relax = RelaxSpec(relu_relaxed=frozenset(nodes))
    elif kind == "no-r":
        relax = RelaxSpec.exact()
    else:
        raise ValueError(f"no subproblems for scheme kind {kind!r}")

    model = MilpModel(LinearModel())
    emb = embed_network(model, net, bounds, relax, prefix="bt")
    if E is not None:
        e_lo, e_hi = E
        for j in range(dims[K]):
            if layer == K and j == node:
                continue
            name = emb.x[K, j]
            i = model.base.var_index(name)
            new_lo = max(model.base.lower[i], float(e_lo[j]))
            new_hi = min(model.base.upper[i], float(e_hi[j]))
            if new_lo > new_hi:
                raise InfeasibleNetworkError(
                    K, j, f"output box excludes the computed range of output {j}")
            model.base.set_bounds(name, new_lo, new_hi)
    return model, emb.t_coeffs(layer, node, K + 1)


def _accept(bounds: BoundSet, layer: int, node: int, lo: float, hi: float) -> None:
    """Intersect a node's interval with a newly proved one."""
    new_lo = max(float(bounds.lower[layer][node]), lo)
    new_hi = min(float(bounds.upper[layer][node]), hi)
    if new_lo > new_hi:
        if new_lo - new_hi > 1e-7:
            raise InfeasibleNetworkError(
                layer, node, f"bounds crossed at node ({layer}, {node}): "
                             f"[{new_lo}, {new_hi}]")
        new_lo = new_hi = 0.5 * (new_lo + new_hi)
    bounds.lower[layer][node] = new_lo
    bounds.upper[layer][node] = new_hi


def _obbt_pass(net, bounds, E, scheme: BtScheme, params: BtParams,
               node_times: dict) -> int:
    """One sweep of an optimization-based scheme; returns timeout count."""
    K = net.depth
    dims = net.layer_dims
    start_layer = 0 if scheme.kind in _BBP_KINDS else 1
    sub_params = SolveParams(
        time_limit_seconds=scheme.subproblem_time_limit,
        gap_tolerance=params.gap_tolerance,
        integrality_tolerance=params.integrality_tolerance,
        lp=params.lp,
    )
    timeouts = 0
    for layer in range(start_layer, K + 1):
        for node in range(dims[layer]):
            tic = time.perf_counter()
            model, coeffs = _subproblem_model(net, bounds, E, scheme.kind,
                                              layer, node)
            proved = {}
            for direction in (True, False):  # maximize, then minimize
                model.base.set_objective(coeffs, maximize=direction)
                result = solve_milp(model, sub_params)
                if result.status == MILP_INFEASIBLE:
                    raise InfeasibleNetworkError(layer, node)
                if result.status != MILP_OPTIMAL:
                    timeouts += 1
                proved[direction] = result.best_bound
            _accept(bounds, layer, node, proved[False], proved[True])
            node_times[layer, node] = (node_times.get((layer, node), 0.0)
                                       + time.perf_counter() - tic)
    return timeouts


def tighten(net: ReluNetwork, input_box, output_box=None,
            scheme: BtScheme | str = "lrr",
            params: BtParams | None = None) -> BtReport:
    """Run one bound-tightening procedure and report the tightened set.

    The interval pass always runs first; optimization-based schemes start
    from its bounds and sweep the network the configured number of rounds.
    Raises InfeasibleNetworkError when the input and output boxes admit no
    feasible point.
    """
    if isinstance(scheme, str):
        scheme = parse_scheme(scheme)
    params = params or BtParams()
    t0 = time.perf_counter()
    D_lo, D_hi = as_box(input_box, net.input_dim)
    E = None
    if output_box is not None:
        E = as_box(output_box, net.output_dim)
        if not (np.isfinite(E[0]).all() and np.isfinite(E[1]).all()):
            raise ValueError("output box must be finite when given")

    bounds = interval_bounds(net, (D_lo, D_hi))
    reference = bounds.copy()  # the shared starting point for MRD
    node_times: dict = {(k, j): 0.0 for k in range(net.depth + 1)
                        for j in range(net.layer_dims[k])}
    timeouts = 0
    if scheme.kind != "lrr":
        for _ in range(scheme.rounds):
            timeouts += _obbt_pass(net, bounds, E, scheme, params, node_times)

    hidden = sum(net.hidden_dims)
    dead = active = 0
    for k in range(1, net.depth):
        dead += int(np.sum(bounds.upper[k] < 0.0))
        active += int(np.sum(bounds.lower[k] > 0.0))
    dead_frac = dead / hidden if hidden else 0.0
    active_frac = active / hidden if hidden else 0.0

    mrd_value = None
    if params.optimal_reference is not None:
        mrd_value = mrd(bounds, params.optimal_reference, reference)

    return BtReport(
        scheme=scheme.label(),
        bounds=bounds,
        total_time=time.perf_counter() - t0,
        node_times=node_times,
        dead_neuron_fraction=dead_frac,
        fixed_active_fraction=active_frac,
        unstable_fraction=1.0 - dead_frac - active_frac if hidden else 0.0,
        mad=mad(bounds),
        mrd=mrd_value,
        subproblem_timeouts=timeouts,
    )
