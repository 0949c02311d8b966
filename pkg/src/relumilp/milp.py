"""Branch-and-bound over the bounded-variable simplex for 0-1 MILPs.

Node selection is best-bound with a depth-first dive at the root until a
first incumbent appears (cheap incumbents matter when subproblem time
limits are tight). Branching fixes the most-fractional binary, with the
lowest variable index breaking ties, so searches are deterministic when no
time limit is in force. The reported best_bound is always a valid dual
bound, also when a time limit cuts the search short.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    CompiledLp,
    LinearModel,
    LpParams,
)

__all__ = [
    "MilpModel",
    "MilpResult",
    "SolveParams",
    "solve_milp",
    "MILP_OPTIMAL",
    "MILP_FEASIBLE",
    "MILP_INFEASIBLE",
    "MILP_BOUND_ONLY",
]

MILP_OPTIMAL = "optimal"
MILP_FEASIBLE = "feasible"
MILP_INFEASIBLE = "infeasible"
MILP_BOUND_ONLY = "bound-only"


class MilpModel:
    """A LinearModel plus the set of variables restricted to {0, 1}."""

    def __init__(self, base: LinearModel, binaries: set[str] | None = None):
        self.base = base
        self.binaries: set[str] = set(binaries or ())
        for name in self.binaries:
            i = base.var_index(name)
            if base.lower[i] < -1e-9 or base.upper[i] > 1.0 + 1e-9:
                raise ValueError(f"binary {name!r} has bounds outside [0, 1]")

    def mark_binary(self, name: str) -> None:
        i = self.base.var_index(name)
        if self.base.lower[i] < -1e-9 or self.base.upper[i] > 1.0 + 1e-9:
            raise ValueError(f"binary {name!r} has bounds outside [0, 1]")
        self.binaries.add(name)


@dataclass
class SolveParams:
    time_limit_seconds: float | None = None
    gap_tolerance: float = 1e-6
    integrality_tolerance: float = 1e-6
    lp: LpParams = field(default_factory=LpParams)

    def __post_init__(self):
        if self.time_limit_seconds is not None and self.time_limit_seconds < 0:
            raise ValueError("time limit must be nonnegative")
        if self.gap_tolerance < 0 or self.integrality_tolerance < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass
class MilpResult:
    status: str
    incumbent: dict[str, float] | None
    objective_value: float | None
    best_bound: float
    gap: float
    node_count: int
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective_value": self.objective_value,
            "best_bound": self.best_bound,
            "gap": self.gap,
            "node_count": self.node_count,
            "wall_time": self.wall_time,
            "incumbent": self.incumbent,
        }


def _relative_gap(best_bound: float, objective: float) -> float:
    return abs(best_bound - objective) / max(abs(objective), 1e-10)


class _Search:
    """State for one branch-and-bound run."""

    def __init__(self, model: MilpModel, params: SolveParams):
        self.compiled = CompiledLp(model.base)
        self.params = params
        self.sign = 1.0 if model.base.maximize else -1.0  # work in max space
        self.bin_idx = np.array(sorted(model.base.var_index(v) for v in model.binaries),
                                dtype=int)
        self.heap: list = []
        self.tie = 0
        self.incumbent: np.ndarray | None = None
        self.incumbent_obj = -np.inf  # in max space
        self.node_count = 0
        self.t0 = time.perf_counter()
        self.deadline = (self.t0 + params.time_limit_seconds
                         if params.time_limit_seconds is not None else None)

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.perf_counter() > self.deadline

    def solve_node(self, lb, ub):
        self.node_count += 1
        status, x, obj = self.compiled.solve(lb, ub, params=self.params.lp)
        if status == UNBOUNDED:
            raise ValueError("MILP relaxation is unbounded")
        if status != OPTIMAL:
            return None, None
        return x, self.sign * obj

    def fractional_binary(self, x) -> int | None:
        """Index of the most-fractional binary, or None when integral."""
        if self.bin_idx.size == 0:
            return None
        vals = x[self.bin_idx]
        frac = np.abs(vals - np.round(vals))
        worst = int(np.argmax(frac))
        if frac[worst] <= self.params.integrality_tolerance:
            return None
        # Most fractional means closest to one half.
        dist = np.abs(vals - 0.5)
        best = np.inf
        pick = -1
        for i, (f, d) in enumerate(zip(frac, dist)):
            if f <= self.params.integrality_tolerance:
                continue
            if d < best - 1e-15:
                best = d
                pick = i
        return int(self.bin_idx[pick])

    def try_incumbent(self, x, sobj, lb, ub) -> None:
        """Accept an integral node, re-solving with binaries pinned if needed."""
        if self.bin_idx.size:
            vals = x[self.bin_idx]
            rounded = np.round(vals)
            if np.max(np.abs(vals - rounded)) > 1e-12:
                lb2, ub2 = lb.copy(), ub.copy()
                lb2[self.bin_idx] = rounded
                ub2[self.bin_idx] = rounded
                x2, sobj2 = self.solve_node(lb2, ub2)
                if x2 is None:
                    return
                x, sobj = x2, sobj2
        if sobj > self.incumbent_obj:
            self.incumbent_obj = sobj
            self.incumbent = x.copy()

    def push(self, bound, lb, ub) -> None:
        heapq.heappush(self.heap, (-bound, self.tie, lb, ub))
        self.tie += 1

    def best_open_bound(self) -> float:
        return -self.heap[0][0] if self.heap else -np.inf

    def prune(self, bound) -> bool:
        if self.incumbent is None:
            return False
        slack = max(self.params.gap_tolerance * abs(self.incumbent_obj), 1e-12)
        return bound <= self.incumbent_obj + slack


def solve_milp(model: MilpModel, params: SolveParams | None = None) -> MilpResult:
    params = params or SolveParams()
    search = _Search(model, params)
    lb0 = search.compiled.lb.copy()
    ub0 = search.compiled.ub.copy()

    # The root relaxation is always solved in full, so even a vanishing time
    # limit yields a valid dual bound.
    x, sobj = search.solve_node(lb0, ub0)
    if x is None:
        return _finish(search, MILP_INFEASIBLE)

    branch = search.fractional_binary(x)
    if branch is None:
        search.try_incumbent(x, sobj, lb0, ub0)
        return _finish(search, MILP_OPTIMAL, dual=sobj)

    # Root dive: follow the rounding of the branching variable, queueing the
    # sibling, until an incumbent or a pruned/infeasible node stops it.
    timed_out = False
    inflight = sobj  # bound of the node currently being dived
    lb, ub = lb0, ub0
    while True:
        if search.out_of_time():
            timed_out = True
            break
        first = round(float(x[branch]))
        lb_a, ub_a = lb.copy(), ub.copy()
        lb_a[branch] = ub_a[branch] = first
        lb_b, ub_b = lb.copy(), ub.copy()
        lb_b[branch] = ub_b[branch] = 1 - first
        search.push(sobj, lb_b, ub_b)
        x, sobj = search.solve_node(lb_a, ub_a)
        if x is None:
            inflight = -np.inf
            break
        lb, ub = lb_a, ub_a
        inflight = sobj
        branch = search.fractional_binary(x)
        if branch is None:
            search.try_incumbent(x, sobj, lb, ub)
            inflight = -np.inf
            break

    # Best-bound main loop.
    while not timed_out and search.heap:
        if search.out_of_time():
            timed_out = True
            break
        neg_bound, _, lb, ub = heapq.heappop(search.heap)
        parent_bound = -neg_bound
        if search.prune(parent_bound):
            continue
        if search.incumbent is not None:
            dual = max(parent_bound, search.incumbent_obj)
            if _relative_gap(dual, search.incumbent_obj) <= params.gap_tolerance:
                return _finish(search, MILP_OPTIMAL, dual=dual)
        x, sobj = search.solve_node(lb, ub)
        if x is None or search.prune(sobj):
            continue
        branch = search.fractional_binary(x)
        if branch is None:
            search.try_incumbent(x, sobj, lb, ub)
            continue
        first = round(float(x[branch]))
        for val in (first, 1 - first):
            lb_c, ub_c = lb.copy(), ub.copy()
            lb_c[branch] = ub_c[branch] = val
            search.push(sobj, lb_c, ub_c)

    if timed_out:
        dual = max(search.best_open_bound(), search.incumbent_obj, inflight)
        status = MILP_FEASIBLE if search.incumbent is not None else MILP_BOUND_ONLY
        return _finish(search, status, dual=dual)
    if search.incumbent is None:
        return _finish(search, MILP_INFEASIBLE)
    return _finish(search, MILP_OPTIMAL, dual=search.incumbent_obj)


def _finish(search: _Search, status: str, dual: float | None = None) -> MilpResult:
    wall = time.perf_counter() - search.t0
    sign = search.sign
    names = search.compiled.names
    if status == MILP_INFEASIBLE:
        return MilpResult(MILP_INFEASIBLE, None, None, best_bound=sign * -np.inf,
                          gap=np.inf, node_count=search.node_count, wall_time=wall)
    sdual = dual if dual is not None else max(search.best_open_bound(),
                                              search.incumbent_obj)
    if search.incumbent is None:
        return MilpResult(MILP_BOUND_ONLY, None, None, best_bound=sign * sdual,
                          gap=np.inf, node_count=search.node_count, wall_time=wall)
    sdual = max(sdual, search.incumbent_obj)
    obj = sign * search.incumbent_obj
    values = dict(zip(names, map(float, search.incumbent)))
    return MilpResult(status, values, obj, best_bound=sign * sdual,
                      gap=_relative_gap(sdual, search.incumbent_obj),
                      node_count=search.node_count, wall_time=wall)
