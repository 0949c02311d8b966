"""Dense linear programming with explicit variable bounds.

The solver is a two-phase primal simplex working on a dense tableau of the
constraint matrix with slack and artificial columns appended. Nonbasic
variables rest at a finite bound (or at zero when free); the ratio test
allows bound flips, so variables with two finite bounds never need
splitting. Dantzig pricing is used until a long run of degenerate pivots is
detected, after which Bland's rule takes over to guarantee termination.

Problems here are small and dense, so no factorization or sparsity tricks
are attempted; the tableau is refreshed from a direct solve every so often
to keep roundoff in check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LinearModel",
    "LpParams",
    "LpSolution",
    "CompiledLp",
    "solve_lp",
    "write_lp",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = ("<=", "=", ">=")

# Nonbasic/basic variable states.
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


@dataclass
class LpParams:
    feasibility_tol: float = 1e-7
    pivot_tol: float = 1e-9
    max_iterations: int | None = None


@dataclass
class LpSolution:
    status: str
    x: dict[str, float] | None = None
    objective_value: float | None = None


class LinearModel:
    """Variables with bounds, linear constraints, and a linear objective."""

    def __init__(self):
        self.names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.constraints: list[tuple[dict[str, float], str, float]] = []
        self.objective: dict[str, float] = {}
        self.maximize: bool = False
        self._index: dict[str, int] = {}

    def add_variable(self, name: str, lower: float = -np.inf, upper: float = np.inf) -> str:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        lower, upper = float(lower), float(upper)
        if np.isnan(lower) or np.isnan(upper):
            raise ValueError(f"variable {name!r} has NaN bound")
        if lower > upper:
            raise ValueError(f"variable {name!r} has lower {lower} > upper {upper}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lower.append(lower)
        self.upper.append(upper)
        return name

    def set_bounds(self, name: str, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"variable {name!r} has lower {lower} > upper {upper}")
        i = self._index[name]
        self.lower[i] = float(lower)
        self.upper[i] = float(upper)

    def var_index(self, name: str) -> int:
        return self._index[name]

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def add_constraint(self, coeffs: dict[str, float], relation: str, rhs: float) -> int:
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {relation!r}")
        clean = {}
        for name, val in coeffs.items():
            if name not in self._index:
                raise ValueError(f"constraint references unknown variable {name!r}")
            val = float(val)
            if not np.isfinite(val):
                raise ValueError(f"non-finite coefficient on {name!r}")
            if val != 0.0:
                clean[name] = val
        if not np.isfinite(rhs):
            raise ValueError("constraint rhs must be finite")
        self.constraints.append((clean, relation, float(rhs)))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: dict[str, float], maximize: bool = False) -> None:
        for name in coeffs:
            if name not in self._index:
                raise ValueError(f"objective references unknown variable {name!r}")
        self.objective = {k: float(v) for k, v in coeffs.items() if float(v) != 0.0}
        self.maximize = bool(maximize)

    @property
    def num_variables(self) -> int:
        return len(self.names)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)


class CompiledLp:
    """Dense array form of a LinearModel, reusable across repeated solves.

    Bound and objective arrays may be swapped per solve, which is what the
    branch-and-bound tree and the bound-tightening loops rely on. The
    constraint matrix itself is fixed at compile time.
    """

    def __init__(self, model: LinearModel):
        n = model.num_variables
        self.names = list(model.names)
        self.lb = np.array(model.lower, dtype=float)
        self.ub = np.array(model.upper, dtype=float)

        rows, senses, rhs = [], [], []
        for coeffs, rel, b in model.constraints:
            if not coeffs:
                # Empty rows are dropped after a consistency check.
                if ((rel == "<=" and 0.0 > b + 1e-12)
                        or (rel == ">=" and 0.0 < b - 1e-12)
                        or (rel == "=" and abs(b) > 1e-12)):
                    self.trivially_infeasible = True
                continue
            row = np.zeros(n)
            for name, val in coeffs.items():
                row[model.var_index(name)] = val
            rows.append(row)
            senses.append(rel)
            rhs.append(b)
        if not hasattr(self, "trivially_infeasible"):
            self.trivially_infeasible = False
        m = len(rows)
        self.m = m
        self.n = n
        body = np.array(rows) if rows else np.zeros((0, n))
        # One slack per row: <= gives s in [0, inf), >= gives s in (-inf, 0],
        # = pins s to zero. Rows then read a.x + s = rhs.
        slack_lb = np.array([0.0 if s == "<=" else (-np.inf if s == ">=" else 0.0)
                             for s in senses])
        slack_ub = np.array([np.inf if s == "<=" else (0.0 if s == ">=" else 0.0)
                             for s in senses])
        self.A = np.hstack([body, np.eye(m)]) if m else np.zeros((0, n))
        # Extended matrix with the artificial identity appended once; every
        # solve copies it into its working tableau.
        self.A_ext = np.ascontiguousarray(
            np.hstack([self.A, np.eye(m)]) if m else self.A)
        self.slack_lb = slack_lb
        self.slack_ub = slack_ub
        self.rhs = np.ascontiguousarray(rhs, dtype=float)

        self.c = np.zeros(n)
        for name, val in model.objective.items():
            self.c[model.var_index(name)] = val
        self.maximize = model.maximize

    def solve(
        self,
        lb: np.ndarray | None = None,
        ub: np.ndarray | None = None,
        c: np.ndarray | None = None,
        maximize: bool | None = None,
        params: LpParams | None = None,
    ) -> tuple[str, np.ndarray | None, float | None]:
        """Solve with optional overrides; returns (status, x, objective)."""
        if self.trivially_infeasible:
            return INFEASIBLE, None, None
        params = params or LpParams()
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        c = self.c if c is None else c
        maximize = self.maximize if maximize is None else maximize
        if np.any(lb > ub):
            return INFEASIBLE, None, None

        lb_full = np.concatenate([lb, self.slack_lb]) if self.m else np.asarray(lb, float).copy()
        ub_full = np.concatenate([ub, self.slack_ub]) if self.m else np.asarray(ub, float).copy()
        cost = np.concatenate([c, np.zeros(self.m)]) if self.m else np.asarray(c, float).copy()
        if maximize:
            cost = -cost
        status, x_full = _simplex(self.A_ext, self.rhs, lb_full, ub_full, cost, params)
        if status != OPTIMAL:
            return status, None, None
        x = x_full[: self.n]
        obj = float(c @ x)
        return OPTIMAL, x, obj


def solve_lp(model: LinearModel, params: LpParams | None = None) -> LpSolution:
    """Solve a LinearModel; infeasibility and unboundedness come back as status."""
    status, x, obj = CompiledLp(model).solve(params=params)
    if status != OPTIMAL:
        return LpSolution(status=status)
    return LpSolution(OPTIMAL, dict(zip(model.names, map(float, x))), obj)


def _simplex(A_ext, b, lb, ub, cost, params: LpParams):
    """Two-phase bounded-variable primal simplex.

    A_ext is m x (N + m): the constraint body with slack and artificial
    identities appended; lb/ub/cost cover the first N columns. Minimizes
    cost. Returns (status, x) over the N columns.
    """
    m = A_ext.shape[0]
    n_cols = lb.shape[0]
    feas_tol = params.feasibility_tol
    piv_tol = params.pivot_tol
    max_iter = params.max_iterations or (2000 + 200 * (m + n_cols + m))
    bland_after = 5 * (m + n_cols + m)

    # Nonbasic start: every column at its nearest finite bound, free at 0.
    x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    state = np.where(np.isfinite(lb), _AT_LOWER,
                     np.where(np.isfinite(ub), _AT_UPPER, _FREE)).astype(np.int64)

    if m == 0:
        code = _core.pivot_loop(
            np.zeros((0, n_cols)), np.zeros((0, n_cols)), b,
            np.empty(0, dtype=np.int64), x, state, lb.copy(), ub.copy(),
            cost.copy(), feas_tol, piv_tol, max_iter, bland_after)
        if code == _core.STATUS_UNBOUNDED:
            return UNBOUNDED, None
        if code == _core.STATUS_ITER_LIMIT:
            raise RuntimeError("simplex iteration limit exceeded")
        return OPTIMAL, x

    r = b - A_ext[:, :n_cols] @ x
    T = A_ext.copy()
    x_all = np.concatenate([x, r])
    lb_all = np.concatenate([lb, np.where(r >= 0.0, 0.0, -np.inf)])
    ub_all = np.concatenate([ub, np.where(r >= 0.0, np.inf, 0.0)])
    state_all = np.concatenate([state, np.full(m, _BASIC, dtype=np.int64)])
    basis = np.arange(n_cols, n_cols + m, dtype=np.int64)

    phase1_cost = np.concatenate([np.zeros(n_cols), np.where(r >= 0.0, 1.0, -1.0)])
    code = _core.pivot_loop(T, A_ext, b, basis, x_all, state_all,
                            lb_all, ub_all, phase1_cost, feas_tol, piv_tol,
                            max_iter, bland_after)
    if code == _core.STATUS_ITER_LIMIT:
        raise RuntimeError("simplex iteration limit exceeded")
    if code == _core.STATUS_UNBOUNDED:  # phase 1 is bounded; numerical trouble
        return INFEASIBLE, None
    scale = max(1.0, float(np.abs(b).max())) if m else 1.0
    if float(phase1_cost @ x_all) > feas_tol * scale:
        return INFEASIBLE, None

    # Pin artificials at zero for phase 2; basic ones may linger at value 0.
    lb_all[n_cols:] = 0.0
    ub_all[n_cols:] = 0.0
    art = np.arange(n_cols, n_cols + m)
    nonbasic_art = art[state_all[art] != _BASIC]
    x_all[nonbasic_art] = 0.0
    state_all[nonbasic_art] = _AT_LOWER

    phase2_cost = np.concatenate([cost, np.zeros(m)])
    code = _core.pivot_loop(T, A_ext, b, basis, x_all, state_all,
                            lb_all, ub_all, phase2_cost, feas_tol, piv_tol,
                            max_iter, bland_after)
    if code == _core.STATUS_ITER_LIMIT:
        raise RuntimeError("simplex iteration limit exceeded")
    if code == _core.STATUS_UNBOUNDED:
        return UNBOUNDED, None
    return OPTIMAL, x_all[:n_cols]


def write_lp(model: LinearModel, binaries: set[str] | None = None, name: str = "model") -> str:
    """Render the model in the fixed-format CPLEX-LP text dialect (write-only)."""

    def term(coef: float, var: str, first: bool) -> str:
        sign = "-" if coef < 0 else ("" if first else "+")
        mag = abs(coef)
        return f"{sign} {mag:.17g} {var} " if not first else f"{sign}{mag:.17g} {var} "

    lines = [f"\\Problem name: {name}", "Maximize" if model.maximize else "Minimize"]
    parts = [" obj:"]
    if model.objective:
        first = True
        for var, coef in model.objective.items():
            parts.append(term(coef, var, first))
            first = False
    else:
        parts.append(" 0 " + (model.names[0] if model.names else "x"))
    lines.append(" ".join(p.strip() for p in parts))
    lines.append("Subject To")
    rel_map = {"<=": "<=", ">=": ">=", "=": "="}
    for i, (coeffs, rel, rhs) in enumerate(model.constraints):
        first = True
        body = []
        for var, coef in coeffs.items():
            body.append(term(coef, var, first))
            first = False
        if not body:
            body = ["0 " + (model.names[0] if model.names else "x")]
        lines.append(f" c{i}: " + " ".join(p.strip() for p in body)
                     + f" {rel_map[rel]} {rhs:.17g}")
    lines.append("Bounds")
    for nm, lo, hi in zip(model.names, model.lower, model.upper):
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {nm} free")
        elif lo == -np.inf:
            lines.append(f" -inf <= {nm} <= {hi:.17g}")
        elif hi == np.inf:
            lines.append(f" {nm} >= {lo:.17g}")
        else:
            lines.append(f" {lo:.17g} <= {nm} <= {hi:.17g}")
    if binaries:
        lines.append("Binaries")
        for nm in model.names:
            if nm in binaries:
                lines.append(f" {nm}")
    lines.append("End")
    return "\n".join(lines) + "\n"
