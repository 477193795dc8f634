"""Column generation: restricted master, dual extraction and pricing.

The master selects one slot-allocation column per client while penalizing
slot over-allocation; the pricing sub-model searches, per client, for a
column with negative reduced cost under the master's shadow prices.

Sign convention: sigma values are stored so the reduced cost of a column
is sum_j mask_j * lambda_j + slot_count / f - sigma directly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .ilp import (
    find_latency_violation,
    service_row,
    strengthened_rows,
    window_slots,
    xname,
)
from .mip import (
    Constraint,
    LinearModel,
    LpSolution,
    LpStatus,
    MipStatus,
    Variable,
    solve_lp,
    solve_mip,
)
from .model import (
    ClientRequirement,
    Column,
    ProblemInstance,
    Schedule,
    slot_lower_bound,
)

M_PRIME = 10.0
REDUCED_COST_TOL = 1e-6
TIE_BREAK_EPS = 1e-7


class NodeInfeasibleError(Exception):
    """The branching decisions admit no column for some client."""

    def __init__(self, client_id: int):
        super().__init__(f"no feasible column for client {client_id}")
        self.client_id = client_id


class PricingTimeoutError(Exception):
    """A pricing sub-model ran out of time before proving optimality."""

    def __init__(self, client_id: int):
        super().__init__(f"pricing timed out for client {client_id}")
        self.client_id = client_id


class ClientInfeasibleError(Exception):
    """A single client's sub-model is infeasible under the node fixings."""

    def __init__(self, client_id: int):
        super().__init__(f"sub-model infeasible for client {client_id}")
        self.client_id = client_id


def node_decisions(node) -> tuple:
    """Decisions of a branch-and-bound node; None means the root relaxation."""
    if node is None:
        return ()
    return tuple(node.decisions)


def column_admissible(column: Column, decisions: Sequence[tuple]) -> bool:
    """Whether a column is consistent with forced/forbidden slot decisions."""
    for client_id, slot, allocate in decisions:
        covered = column.mask[slot - 1] == 1
        if client_id == column.client:
            if covered != allocate:
                return False
        elif allocate and covered:
            return False
    return True


class ColumnPool:
    """Per-client column lists with global (client, mask) deduplication."""

    def __init__(self):
        self._columns: dict[int, list[Column]] = {}
        self._seen: set[tuple[int, tuple[int, ...]]] = set()

    def add(self, column: Column) -> bool:
        key = (column.client, column.mask)
        if key in self._seen:
            return False
        self._seen.add(key)
        self._columns.setdefault(column.client, []).append(column)
        return True

    def columns(self, client_id: int) -> list[Column]:
        return list(self._columns.get(client_id, []))

    def clients(self) -> list[int]:
        return sorted(self._columns)

    def __len__(self) -> int:
        return len(self._seen)

    def admissible(self, client_id: int, decisions: Sequence[tuple]) -> list[tuple[int, Column]]:
        return [
            (k, col)
            for k, col in enumerate(self._columns.get(client_id, []))
            if column_admissible(col, decisions)
        ]


@dataclass
class DualPrices:
    lam: dict[int, float]
    sigma: dict[int, float]


@dataclass
class MasterSolution:
    weights: dict[tuple[int, int], float]  # (client id, pool index) -> weight
    overalloc: dict[int, float]
    objective: float

    def is_integral(self, tol: float = 1e-6) -> bool:
        return all(w <= tol or w >= 1 - tol for w in self.weights.values())

    def conflict_free(self, tol: float = 1e-6) -> bool:
        return all(y <= tol for y in self.overalloc.values())

    def chosen_columns(self, pool: ColumnPool, tol: float = 1e-6) -> dict[int, Column]:
        chosen: dict[int, Column] = {}
        for (client_id, k), w in self.weights.items():
            if w >= 1 - tol and client_id not in chosen:
                chosen[client_id] = pool.columns(client_id)[k]
        return chosen


def _wname(client_id: int, k: int) -> str:
    return f"w_{client_id}_{k}"


def build_master(
    pool: ColumnPool, node, instance: ProblemInstance
) -> LinearModel:
    """Restricted master LP over the admissible columns of a node."""
    decisions = node_decisions(node)
    f = instance.frame_size
    variables = []
    cap_terms: dict[int, dict[str, float]] = {j: {} for j in range(1, f + 1)}
    cvx_terms: dict[int, dict[str, float]] = {}
    for client in instance.clients:
        cols = pool.columns(client.id)
        if not cols:
            raise NodeInfeasibleError(client.id)
        admissible = {k for k, _ in pool.admissible(client.id, decisions)}
        if not admissible:
            raise NodeInfeasibleError(client.id)
        cvx = {}
        for k, col in enumerate(cols):
            name = _wname(client.id, k)
            upper = math.inf if k in admissible else 0.0
            variables.append(Variable(name, 0.0, upper, col.slot_count / f))
            cvx[name] = 1.0
            for slot in col.slots():
                cap_terms[slot][name] = 1.0
        cvx_terms[client.id] = cvx
    for j in range(1, f + 1):
        variables.append(Variable(f"y_{j}", 0.0, float(len(instance.clients)), M_PRIME))
    constraints = []
    for j in range(1, f + 1):
        coeffs = dict(cap_terms[j])
        coeffs[f"y_{j}"] = -1.0
        constraints.append(Constraint(f"cap_{j}", tuple(coeffs.items()), "<=", 1.0))
    for client in instance.clients:
        constraints.append(
            Constraint(
                f"cvx_{client.id}", tuple(cvx_terms[client.id].items()), ">=", 1.0
            )
        )
    return LinearModel(variables, constraints)


def solve_master(
    pool: ColumnPool, node, instance: ProblemInstance
) -> tuple[MasterSolution, LpSolution]:
    model = build_master(pool, node, instance)
    lp = solve_lp(model)
    if lp.status != LpStatus.OPTIMAL:
        raise RuntimeError(f"master LP not optimal: {lp.status}")
    weights = {}
    for client in instance.clients:
        for k in range(len(pool.columns(client.id))):
            weights[(client.id, k)] = lp.primal[_wname(client.id, k)]
    overalloc = {
        j: lp.primal[f"y_{j}"] for j in range(1, instance.frame_size + 1)
    }
    return MasterSolution(weights, overalloc, lp.objective), lp


def extract_duals(lp: LpSolution, instance: ProblemInstance) -> DualPrices:
    """Shadow prices of the capacity and convexity rows."""
    if lp.status != LpStatus.OPTIMAL:
        raise ValueError("duals only available for an optimal LP")
    lam = {}
    for j in range(1, instance.frame_size + 1):
        value = -lp.duals.get(f"cap_{j}", 0.0)
        lam[j] = max(0.0, value)  # clip numerical noise below zero
    sigma = {c.id: lp.duals.get(f"cvx_{c.id}", 0.0) for c in instance.clients}
    return DualPrices(lam, sigma)


def canonical_duals(
    pool: ColumnPool,
    node,
    instance: ProblemInstance,
    master_objective: float,
    fallback: Optional[DualPrices] = None,
) -> DualPrices:
    """Minimal-price dual solution on the master's optimal dual face.

    The master LP is dual-degenerate whenever a slot is covered exactly
    once, so the duals returned by the simplex depend on an arbitrary
    basis choice.  Among all optimal duals we pick the one minimizing
    sum_j lambda_j: dual feasibility of every admissible column plus
    strong duality pin down the face, and the minimal prices make pricing
    deterministic and well-scaled.
    """
    decisions = node_decisions(node)
    f = instance.frame_size
    variables = [
        Variable(f"lam_{j}", 0.0, M_PRIME, 1.0) for j in range(1, f + 1)
    ]
    variables += [
        Variable(f"sig_{c.id}", 0.0, math.inf, 0.0) for c in instance.clients
    ]
    constraints = []
    for client in instance.clients:
        for k, col in pool.admissible(client.id, decisions):
            coeffs = {f"lam_{j}": 1.0 for j in col.slots()}
            coeffs[f"sig_{client.id}"] = -1.0
            constraints.append(
                Constraint(
                    f"rc_{client.id}_{k}",
                    tuple(coeffs.items()),
                    ">=",
                    -col.slot_count / f,
                )
            )
    strong = {f"lam_{j}": -1.0 for j in range(1, f + 1)}
    for client in instance.clients:
        strong[f"sig_{client.id}"] = 1.0
    constraints.append(
        Constraint("strong_duality", tuple(strong.items()), "==", master_objective)
    )
    lp = solve_lp(LinearModel(variables, constraints))
    if lp.status != LpStatus.OPTIMAL:
        if fallback is not None:
            return fallback
        raise RuntimeError("dual-selection LP failed")
    lam = {j: max(0.0, lp.primal[f"lam_{j}"]) for j in range(1, f + 1)}
    sigma = {c.id: lp.primal[f"sig_{c.id}"] for c in instance.clients}
    return DualPrices(lam, sigma)


def build_sub_model(
    client: ClientRequirement,
    lam: dict[int, float],
    frame_size: int,
    decisions: Sequence[tuple] = (),
    tie_break: Optional[dict[int, float]] = None,
) -> LinearModel:
    """Single-client pricing model, initially with single-point latency rows.

    ``tie_break`` adds an epsilon-scaled per-slot cost that steers the
    choice among equal-cost columns (toward slots other clients use less)
    without disturbing the primary objective.
    """
    f = frame_size
    variables = []
    for j in range(1, f + 1):
        lo, hi = 0.0, 1.0
        for client_id, slot, allocate in decisions:
            if slot != j:
                continue
            if client_id == client.id:
                if allocate:
                    lo = 1.0
                else:
                    hi = 0.0
            elif allocate:
                hi = 0.0
        cost = lam.get(j, 0.0) + 1.0 / f
        if tie_break:
            cost += TIE_BREAK_EPS * tie_break.get(j, 0.0)
        variables.append(Variable(xname(client.id, j), lo, hi, cost, True))
    constraints = []
    lb = slot_lower_bound(client, f)
    if lb > 0:
        coeffs = {xname(client.id, j): 1.0 for j in range(1, f + 1)}
        constraints.append(Constraint("rate", tuple(coeffs.items()), ">=", float(lb)))
    if client.required_rate > 0:
        theta = client.effective_latency(f)
        j0 = min(math.floor(theta) + 1, f)
        for k in range(1, f + 1):
            constraints.append(service_row(client, f, k, j0))
        constraints.extend(strengthened_rows(client, f))
    return LinearModel(variables, constraints)


def price_client(
    client: ClientRequirement,
    duals: DualPrices,
    frame_size: int,
    node=None,
    gap: float = 0.0,
    time_limit: Optional[float] = None,
    tie_break: Optional[dict[int, float]] = None,
) -> tuple[Column, float, bool]:
    """Minimize the reduced cost of a new column for one client.

    Latency window rows beyond the single-point row are added lazily.
    Returns the best column found, its reduced cost recomputed from the
    mask (free of any tie-break perturbation), and whether the column was
    proven optimal: on a sub-model time-out any incumbent is returned
    with ``proven=False`` so callers can still make progress.
    """
    decisions = node_decisions(node)
    model = build_sub_model(client, duals.lam, frame_size, decisions, tie_break)

    def lazy(assignment):
        mask = [
            int(round(assignment[xname(client.id, j)]))
            for j in range(1, frame_size + 1)
        ]
        hit = find_latency_violation(mask, client, frame_size)
        if hit is None:
            return None
        k, j = hit
        return service_row(client, frame_size, k, j)

    res = solve_mip(model, lazy=lazy, time_limit=time_limit, optimality_gap=gap)
    if res.status == MipStatus.INFEASIBLE:
        raise ClientInfeasibleError(client.id)
    if res.status == MipStatus.TIMED_OUT:
        raise PricingTimeoutError(client.id)
    mask = tuple(
        int(round(res.assignment[xname(client.id, j)]))
        for j in range(1, frame_size + 1)
    )
    column = Column(client.id, mask)
    reduced_cost = (
        sum(duals.lam.get(j, 0.0) for j in column.slots())
        + column.slot_count / frame_size
        - duals.sigma.get(client.id, 0.0)
    )
    return column, reduced_cost, res.status == MipStatus.OPTIMAL


def zero_duals(instance: ProblemInstance) -> DualPrices:
    return DualPrices(
        {j: 0.0 for j in range(1, instance.frame_size + 1)},
        {c.id: 0.0 for c in instance.clients},
    )


def ensure_seed_columns(pool: ColumnPool, node, instance: ProblemInstance) -> None:
    """Guarantee every client has an admissible column under the node.

    Raises NodeInfeasibleError when some client cannot have one at all.
    """
    decisions = node_decisions(node)
    duals = zero_duals(instance)
    for client in instance.clients:
        if pool.admissible(client.id, decisions):
            continue
        try:
            column, _, _ = price_client(client, duals, instance.frame_size, node)
        except ClientInfeasibleError as exc:
            raise NodeInfeasibleError(client.id) from exc
        pool.add(column)


@dataclass
class ColGenLimits:
    upper_bound: float = math.inf
    time_limit: Optional[float] = None
    max_iterations: int = 10_000
    pricing_gap: float = 0.0
    # cap on a single pricing sub-model solve; a time-out there still
    # yields the incumbent column when its reduced cost is negative
    pricing_effort: Optional[float] = 10.0
    # "all": add every negatively priced column per round (default);
    # "first": add only the first one, re-solving the master in between
    add_strategy: str = "all"


@dataclass
class ColGenResult:
    master: MasterSolution
    lower_bound: float
    status: str  # "optimal" | "lagrangian_stop" | "stalled" | "timed_out"
    iterations: int
    columns_added: int
    lagrangian_estimates: list = field(default_factory=list)


def _slots_of(value: float, frame_size: int) -> int:
    return math.ceil(value * frame_size - 1e-6)


def _bound_floor(instance: ProblemInstance, lagrangians: list) -> float:
    """Best lower bound that stays valid when pricing is cut short."""
    trivial = float(
        sum(slot_lower_bound(c, instance.frame_size) for c in instance.clients)
    ) / instance.frame_size
    return max([trivial, *lagrangians])


def snap_objective(value: float, frame_size: int) -> Fraction:
    """Master objectives are rationals of modest denominator; recover them."""
    return Fraction(value).limit_denominator(frame_size * frame_size)


def column_generation(
    pool: ColumnPool,
    node,
    instance: ProblemInstance,
    limits: Optional[ColGenLimits] = None,
    trace: Optional[list] = None,
) -> ColGenResult:
    """Iterate master solves and pricing until no client prices negatively.

    Every ``n`` iterations the Lagrangian bound (master value plus the sum
    of all reduced costs) may close the loop early: when it reaches the
    incumbent, or when it discretizes to the same slot count as the
    current master value.
    """
    limits = limits or ColGenLimits()
    t0 = time.monotonic()
    f = instance.frame_size
    n = instance.n_clients
    ensure_seed_columns(pool, node, instance)
    added_total = 0
    iteration = 0
    lagrangians: list = []
    while True:
        iteration += 1
        master, lp = solve_master(pool, node, instance)
        duals = canonical_duals(
            pool, node, instance, master.objective,
            fallback=extract_duals(lp, instance),
        )
        remaining = None
        if limits.time_limit is not None:
            remaining = max(0.1, limits.time_limit - (time.monotonic() - t0))
        budget = limits.pricing_effort
        if remaining is not None:
            budget = remaining if budget is None else min(remaining, budget)
        decisions = node_decisions(node)
        slot_use: dict[int, dict[int, float]] = {}  # client -> slot -> count
        for client in instance.clients:
            counts: dict[int, float] = {}
            for _, col in pool.admissible(client.id, decisions):
                for s in col.slots():
                    counts[s] = counts.get(s, 0.0) + 1.0
            slot_use[client.id] = counts
        priced: list[tuple[ClientRequirement, Column, float, bool]] = []
        for client in sorted(instance.clients, key=lambda c: c.id):
            tie_break: dict[int, float] = {}
            for other_id, counts in slot_use.items():
                if other_id == client.id:
                    continue
                for s, cnt in counts.items():
                    tie_break[s] = tie_break.get(s, 0.0) + cnt
            try:
                column, xi, proven = price_client(
                    client, duals, f, node, limits.pricing_gap, budget, tie_break
                )
            except ClientInfeasibleError as exc:
                raise NodeInfeasibleError(client.id) from exc
            except PricingTimeoutError:
                return ColGenResult(
                    master,
                    _bound_floor(instance, lagrangians),
                    "timed_out",
                    iteration,
                    added_total,
                    lagrangians,
                )
            priced.append((client, column, xi, proven))
            if limits.add_strategy == "first" and xi < -REDUCED_COST_TOL:
                break
        if trace is not None:
            xi_text = " ".join(f"xi[{c.id}]={xi:.6g}" for c, _, xi, _ in priced)
            trace.append(
                f"iter={iteration} phi_mm={snap_objective(master.objective, f)} {xi_text}"
            )
        all_proven = all(proven for _, _, _, proven in priced)
        negative = [(c, col, xi) for c, col, xi, _ in priced if xi < -REDUCED_COST_TOL]
        if not negative:
            if all_proven:
                return ColGenResult(
                    master, master.objective, "optimal", iteration, added_total,
                    lagrangians,
                )
            # nothing negative, but some prices were cut short: the master
            # value is not a proven bound here
            return ColGenResult(
                master,
                _bound_floor(instance, lagrangians),
                "timed_out",
                iteration,
                added_total,
                lagrangians,
            )
        full_round = len(priced) == n
        lagrangian = master.objective + sum(min(0.0, xi) for _, _, xi, _ in priced)
        if full_round and all_proven and iteration % n == 0:
            lagrangians.append(lagrangian)
            same_slots = _slots_of(lagrangian, f) == _slots_of(master.objective, f)
            if lagrangian >= limits.upper_bound - 1e-9 or same_slots:
                return ColGenResult(
                    master, lagrangian, "lagrangian_stop", iteration, added_total,
                    lagrangians,
                )
        if iteration >= limits.max_iterations:
            sound = all_proven
            if not full_round:
                # the bound needs every client's reduced cost
                done = {c.id for c, _, _, _ in priced}
                try:
                    for client in sorted(instance.clients, key=lambda c: c.id):
                        if client.id not in done:
                            _, xi, proven = price_client(
                                client, duals, f, node, limits.pricing_gap, budget
                            )
                            lagrangian += min(0.0, xi)
                            sound = sound and proven
                except ClientInfeasibleError as exc:
                    raise NodeInfeasibleError(exc.client_id) from exc
                except PricingTimeoutError:
                    sound = False
            bound = lagrangian if sound else _bound_floor(instance, lagrangians)
            lagrangians.append(bound)
            return ColGenResult(
                master, bound, "lagrangian_stop", iteration, added_total,
                lagrangians,
            )
        added_now = 0
        for _, column, _ in negative:
            if pool.add(column):
                added_now += 1
        added_total += added_now
        if added_now == 0:
            # duplicate columns priced negative: numerical stall, bail out
            bound = (
                lagrangian
                if full_round and all_proven
                else _bound_floor(instance, lagrangians)
            )
            return ColGenResult(
                master, bound, "stalled", iteration, added_total, lagrangians
            )
