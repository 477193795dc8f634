"""Minimal binary-LP kernel: LP relaxation with duals and branch-and-bound.

The LP relaxation is delegated to HiGHS through scipy; the integer search
is a hand-rolled depth-first branch-and-bound with a lazy-constraint hook,
most-fractional branching and deterministic tie-breaking.

Dual sign convention: duals are returned such that the reduced cost of a
variable v in this minimization is obj(v) - sum_c dual(c) * coef(c, v),
with coefficients as written in the constraint (before any internal
normalization).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

FEASIBILITY_TOL = 1e-9
INTEGRALITY_TOL = 1e-6
DUAL_TOL = 1e-6


class ModelError(ValueError):
    """Structural problem in a LinearModel."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class MipStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIMED_OUT = "timed_out"


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = 1.0
    objective: float = 0.0
    is_integer: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str  # "<=", ">=" or "=="
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ModelError(f"bad sense {self.sense!r} in constraint {self.name}")
        object.__setattr__(self, "coeffs", tuple(self.coeffs))


def constraint(name: str, coeffs: dict, sense: str, rhs: float) -> Constraint:
    return Constraint(name, tuple(coeffs.items()), sense, float(rhs))


class LinearModel:
    """An immutable minimization model over bounded (possibly binary) vars."""

    def __init__(self, variables: Sequence[Variable], constraints: Sequence[Constraint]):
        self.variables = tuple(variables)
        self.constraints = tuple(constraints)
        self._index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self._index) != len(self.variables):
            raise ModelError("duplicate variable names")
        cnames = {c.name for c in self.constraints}
        if len(cnames) != len(self.constraints):
            raise ModelError("duplicate constraint names")
        for c in self.constraints:
            for var, _ in c.coeffs:
                if var not in self._index:
                    raise ModelError(f"constraint {c.name} references unknown {var}")
        for v in self.variables:
            if v.is_integer and not (
                math.isfinite(v.lower) and math.isfinite(v.upper)
            ):
                raise ModelError(f"integer variable {v.name} must have finite bounds")
        self._arrays = None

    def var_index(self, name: str) -> int:
        return self._index[name]

    def _base_arrays(self):
        """Cached (c, bounds, A_ub, b_ub, ub_meta, A_eq, b_eq, eq_names)."""
        if self._arrays is not None:
            return self._arrays
        nvar = len(self.variables)
        c = np.array([v.objective for v in self.variables], dtype=float)
        bounds = np.array([(v.lower, v.upper) for v in self.variables], dtype=float)
        ub_rows, ub_rhs, ub_meta = [], [], []
        eq_rows, eq_rhs, eq_names = [], [], []
        for con in self.constraints:
            row = np.zeros(nvar)
            for var, coef in con.coeffs:
                row[self._index[var]] += coef
            if con.sense == "<=":
                ub_rows.append(row)
                ub_rhs.append(con.rhs)
                ub_meta.append((con.name, 1.0))
            elif con.sense == ">=":
                ub_rows.append(-row)
                ub_rhs.append(-con.rhs)
                ub_meta.append((con.name, -1.0))
            else:
                eq_rows.append(row)
                eq_rhs.append(con.rhs)
                eq_names.append(con.name)
        A_ub = sparse.csr_matrix(np.array(ub_rows)) if ub_rows else None
        A_eq = sparse.csr_matrix(np.array(eq_rows)) if eq_rows else None
        self._arrays = (
            c,
            bounds,
            A_ub,
            np.array(ub_rhs),
            ub_meta,
            A_eq,
            np.array(eq_rhs),
            eq_names,
        )
        return self._arrays


@dataclass
class LpSolution:
    status: LpStatus
    primal: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan


@dataclass
class MipSolution:
    status: MipStatus
    assignment: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    best_bound: float = -math.inf
    nodes: int = 0


def _row_from(model: LinearModel, con: Constraint) -> tuple[np.ndarray, float, float]:
    nvar = len(model.variables)
    row = np.zeros(nvar)
    for var, coef in con.coeffs:
        row[model.var_index(var)] += coef
    if con.sense == "<=":
        return row, con.rhs, 1.0
    if con.sense == ">=":
        return -row, -con.rhs, -1.0
    raise ModelError("lazy constraints must be inequalities")


def solve_lp(
    model: LinearModel,
    bound_overrides: Optional[dict[str, tuple[float, float]]] = None,
    extra_rows: Sequence[Constraint] = (),
) -> LpSolution:
    """Solve the LP relaxation; deterministic for a fixed input.

    ``bound_overrides`` tightens variable bounds without rebuilding the
    model; ``extra_rows`` appends inequality rows (used for lazy cuts).
    """
    c, bounds, A_ub, b_ub, ub_meta, A_eq, b_eq, eq_names = model._base_arrays()
    bounds = bounds.copy()
    if bound_overrides:
        for name, (lo, hi) in bound_overrides.items():
            i = model.var_index(name)
            bounds[i, 0] = max(bounds[i, 0], lo)
            bounds[i, 1] = min(bounds[i, 1], hi)
            if bounds[i, 0] > bounds[i, 1] + FEASIBILITY_TOL:
                return LpSolution(LpStatus.INFEASIBLE)
    extra_meta = []
    if extra_rows:
        rows, rhs = [], []
        for con in extra_rows:
            row, b, sign = _row_from(model, con)
            rows.append(row)
            rhs.append(b)
            extra_meta.append((con.name, sign))
        block = sparse.csr_matrix(np.array(rows))
        A_ub = block if A_ub is None else sparse.vstack([A_ub, block], format="csr")
        b_ub = np.concatenate([b_ub, np.array(rhs)])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=b_ub if A_ub is not None else None,
        A_eq=A_eq,
        b_eq=b_eq if A_eq is not None else None,
        bounds=bounds,
        method="highs",
    )
    if res.status not in (0, 2, 3):
        # HiGHS occasionally reports "Unknown" on numerically awkward
        # models; dual simplex without presolve is a reliable fallback
        res = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub if A_ub is not None else None,
            A_eq=A_eq,
            b_eq=b_eq if A_eq is not None else None,
            bounds=bounds,
            method="highs-ds",
            options={"presolve": False},
        )
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED)
    if res.status != 0:
        raise ModelError(f"LP solver failure: {res.message}")
    primal = {v.name: float(x) for v, x in zip(model.variables, res.x)}
    duals: dict[str, float] = {}
    all_meta = list(ub_meta) + extra_meta
    if all_meta:
        for (name, sign), m in zip(all_meta, res.ineqlin.marginals):
            duals[name] = sign * float(m)
    if eq_names:
        for name, m in zip(eq_names, res.eqlin.marginals):
            duals[name] = float(m)
    return LpSolution(LpStatus.OPTIMAL, primal, duals, float(res.fun))


def _most_fractional(model: LinearModel, primal: dict[str, float]) -> Optional[str]:
    best_name, best_frac = None, INTEGRALITY_TOL
    for v in model.variables:
        if not v.is_integer:
            continue
        x = primal[v.name]
        frac = min(x - math.floor(x), math.ceil(x) - x)
        if frac > best_frac + 1e-12:
            best_name, best_frac = v.name, frac
    return best_name


def _snap_bound(bound: float, grid: Optional[float]) -> float:
    if grid is None:
        return bound
    return math.ceil(bound / grid - 1e-6) * grid


def solve_mip(
    model: LinearModel,
    lazy: Optional[Callable[[dict[str, float]], Optional[Constraint]]] = None,
    time_limit: Optional[float] = None,
    optimality_gap: float = 0.0,
    bound_grid: Optional[float] = None,
) -> MipSolution:
    """Depth-first branch-and-bound over the integer variables.

    Whenever an integral candidate appears, the lazy callback may return a
    violated constraint; it is added globally and the node is re-solved.
    ``bound_grid`` optionally rounds node bounds up to a known objective
    granularity, which tightens pruning without affecting correctness.
    """
    t0 = time.monotonic()
    lazy_rows: list[Constraint] = []
    best_obj = math.inf
    best_assignment: Optional[dict[str, float]] = None
    min_pruned = math.inf
    nodes = 0
    timed_out = False
    # stack entries: (bound_overrides, parent LP bound)
    stack: list[tuple[dict[str, tuple[float, float]], float]] = [({}, -math.inf)]

    def prune_threshold() -> float:
        if best_assignment is None:
            return math.inf
        slack = max(FEASIBILITY_TOL, optimality_gap * max(1.0, abs(best_obj)))
        return best_obj - slack

    open_bounds: list[float] = []
    while stack:
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            timed_out = True
            open_bounds.extend(pb for _, pb in stack)
            break
        overrides, parent_bound = stack.pop()
        if parent_bound >= prune_threshold():
            min_pruned = min(min_pruned, parent_bound)
            continue
        nodes += 1
        while True:
            lp = solve_lp(model, overrides, lazy_rows)
            if lp.status != LpStatus.OPTIMAL:
                break  # infeasible node (unbounded cannot occur with finite bounds)
            bound = _snap_bound(lp.objective, bound_grid)
            if bound >= prune_threshold():
                min_pruned = min(min_pruned, bound)
                break
            branch_var = _most_fractional(model, lp.primal)
            if branch_var is not None:
                x = lp.primal[branch_var]
                lo, hi = math.floor(x), math.ceil(x)
                prev_lo, prev_hi = overrides.get(branch_var, (-math.inf, math.inf))
                down = dict(overrides)
                down[branch_var] = (prev_lo, min(prev_hi, float(lo)))
                up = dict(overrides)
                up[branch_var] = (max(prev_lo, float(hi)), prev_hi)
                # dive toward the nearer integer first (pushed last)
                if x - lo <= hi - x:
                    stack.append((up, bound))
                    stack.append((down, bound))
                else:
                    stack.append((down, bound))
                    stack.append((up, bound))
                break
            assignment = {
                v.name: (round(lp.primal[v.name]) if v.is_integer else lp.primal[v.name])
                for v in model.variables
            }
            violated = lazy(assignment) if lazy is not None else None
            if violated is not None:
                lazy_rows.append(violated)
                continue  # re-solve this node with the new row
            if lp.objective < best_obj - FEASIBILITY_TOL:
                best_obj = lp.objective
                best_assignment = assignment
            break

    if best_assignment is None:
        if timed_out:
            bound = min(open_bounds, default=math.inf)
            return MipSolution(MipStatus.TIMED_OUT, {}, math.nan, bound, nodes)
        return MipSolution(MipStatus.INFEASIBLE, {}, math.nan, math.inf, nodes)
    lower = min(min_pruned, best_obj)
    if timed_out:
        lower = min(lower, min(open_bounds, default=math.inf))
        return MipSolution(MipStatus.FEASIBLE, best_assignment, best_obj, lower, nodes)
    if lower >= best_obj - 1e-9:
        return MipSolution(MipStatus.OPTIMAL, best_assignment, best_obj, best_obj, nodes)
    return MipSolution(MipStatus.FEASIBLE, best_assignment, best_obj, lower, nodes)
