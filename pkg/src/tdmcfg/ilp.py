"""Monolithic ILP over binary slot variables, with the classic speedups.

Service constraints are written in allocated-rate form: for a window of
duration j starting at slot k, the slots the client holds inside the
window must be at least (j - latency_bound) * phi_i / f, where phi_i is
the client's (variable) slot count.  This is the linear form of the exact
latency definition used by the verifier, so solver and verifier agree.
Any window rows dropped by the pruning options are enforced lazily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .mip import (
    Constraint,
    LinearModel,
    MipStatus,
    Variable,
    solve_mip,
)
from .model import (
    ClientRequirement,
    DominanceClass,
    ProblemInstance,
    Schedule,
    ServiceCurve,
    dominance_class,
    slot_lower_bound,
)


class FixingConflictError(ValueError):
    """Contradictory forced slot decisions."""


@dataclass(frozen=True)
class IlpBuildOptions:
    prune_below_latency: bool = True
    latency_dominated_single_point: bool = True
    fix_first_slot: bool = True
    partial_fixings: frozenset = field(default_factory=frozenset)
    # each fixing is (client_id, slot (1-based), allocate: bool)


def xname(client_id: int, slot: int) -> str:
    return f"x_{client_id}_{slot}"


def window_slots(frame_size: int, k: int, j: int) -> list[int]:
    """1-based slots of the cyclic window of duration j starting at k."""
    return [(k - 1 + off) % frame_size + 1 for off in range(j)]


def check_fixings(fixings: Iterable[tuple]) -> dict[tuple[int, int], bool]:
    decided: dict[tuple[int, int], bool] = {}
    slot_owner: dict[int, int] = {}
    for client_id, slot, value in fixings:
        key = (client_id, slot)
        if key in decided and decided[key] != value:
            raise FixingConflictError(f"client {client_id}, slot {slot} fixed both ways")
        decided[key] = value
        if value:
            if slot in slot_owner and slot_owner[slot] != client_id:
                raise FixingConflictError(f"slot {slot} forced to two clients")
            slot_owner[slot] = client_id
    return decided


def service_row(
    client: ClientRequirement, frame_size: int, k: int, j: int
) -> Constraint:
    """Window row: slots in window >= (j - latency) / f * total slots."""
    theta = client.effective_latency(frame_size)
    coef = float(Fraction(j) - theta) / frame_size
    coeffs = {xname(client.id, s): -coef for s in range(1, frame_size + 1)}
    for s in window_slots(frame_size, k, j):
        coeffs[xname(client.id, s)] += 1.0
    return Constraint(
        f"svc_{client.id}_{k}_{j}", tuple(coeffs.items()), ">=", 0.0
    )


def strengthened_rows(
    client: ClientRequirement, frame_size: int
) -> list[Constraint]:
    """Integer-strengthened window rows implied by the latency condition.

    Any feasible mask with phi >= lb slots satisfies, for every window,
    wc(k, j) >= phi * (j - latency) / f >= lb * (j - latency) / f, hence
    wc(k, j) >= ceil(lb * (j - latency) / f).  Rows are emitted only at
    the j values where that ceiling increases; they are redundant with
    the exact rows but give the LP relaxation integral strength.
    """
    f = frame_size
    lb = slot_lower_bound(client, f)
    if lb == 0 or client.required_latency is None:
        return []
    theta = client.effective_latency(f)
    rows: list[Constraint] = []
    for r in range(1, lb + 1):
        # smallest j with lb*(j - theta)/f > r - 1
        bound = theta + Fraction((r - 1) * f, lb)
        j = math.floor(bound) + 1
        if j > f:
            break
        for k in range(1, f + 1):
            coeffs = {xname(client.id, s): 1.0 for s in window_slots(f, k, j)}
            rows.append(
                Constraint(
                    f"lat{r}_{client.id}_{k}_{j}",
                    tuple(coeffs.items()),
                    ">=",
                    float(r),
                )
            )
    return rows


def find_latency_violation(
    mask: list[int], client: ClientRequirement, frame_size: int
) -> Optional[tuple[int, int]]:
    """First (k, j) window where the exact latency condition fails.

    Exact rational comparison: wc(k, j) * f >= phi * (j - latency).
    Returns None when the mask meets the client's latency bound.
    """
    phi = sum(mask)
    if phi == 0 or client.required_rate == 0:
        return None
    theta = client.effective_latency(frame_size)
    num, den = theta.numerator, theta.denominator
    curve = ServiceCurve(mask)
    for j in range(1, frame_size + 1):
        need = phi * (j * den - num)  # scaled by den; compare against wc*f*den
        if need <= 0:
            continue
        scale = frame_size * den
        for k in range(1, frame_size + 1):
            if curve.value(k, j) * scale < need:
                return (k, j)
    return None


def build_ilp(
    instance: ProblemInstance, opts: Optional[IlpBuildOptions] = None
) -> LinearModel:
    """Assemble the slot-assignment ILP for an instance."""
    opts = opts or IlpBuildOptions()
    decided = check_fixings(opts.partial_fixings)
    f = instance.frame_size
    variables = []
    for c in instance.clients:
        for j in range(1, f + 1):
            fixed = decided.get((c.id, j))
            lo = 1.0 if fixed is True else 0.0
            hi = 0.0 if fixed is False else 1.0
            variables.append(
                Variable(xname(c.id, j), lo, hi, 1.0 / f, is_integer=True)
            )
    constraints = []
    for j in range(1, f + 1):
        coeffs = {xname(c.id, j): 1.0 for c in instance.clients}
        constraints.append(Constraint(f"cap_{j}", tuple(coeffs.items()), "<=", 1.0))
    bounds = {c.id: slot_lower_bound(c, f) for c in instance.clients}
    for c in instance.clients:
        if bounds[c.id] > 0:
            coeffs = {xname(c.id, j): 1.0 for j in range(1, f + 1)}
            constraints.append(
                Constraint(f"rate_{c.id}", tuple(coeffs.items()), ">=", float(bounds[c.id]))
            )
    for c in instance.clients:
        if c.required_rate == 0:
            continue
        theta = c.effective_latency(f)
        if (
            opts.latency_dominated_single_point
            and dominance_class(c, f) == DominanceClass.LATENCY_DOMINATED
        ):
            j_values: Iterable[int] = [min(math.floor(theta) + 1, f)]
        elif opts.prune_below_latency:
            j_values = [j for j in range(1, f + 1) if j >= theta]
        else:
            j_values = range(1, f + 1)
        for j in j_values:
            for k in range(1, f + 1):
                constraints.append(service_row(c, f, k, j))
        constraints.extend(strengthened_rows(c, f))
    if opts.fix_first_slot and not any(slot == 1 for _, slot, _ in opts.partial_fixings):
        target = min(
            instance.clients, key=lambda c: (bounds[c.id], c.id)
        )
        if bounds[target.id] >= 1:
            constraints.append(
                Constraint(
                    "fix_first", ((xname(target.id, 1), 1.0),), "==", 1.0
                )
            )
    return LinearModel(variables, constraints)


def latency_lazy_callback(instance: ProblemInstance):
    """Lazy hook restoring any pruned window rows on integral candidates."""

    f = instance.frame_size

    def callback(assignment: dict[str, float]) -> Optional[Constraint]:
        for c in instance.clients:
            mask = [int(round(assignment[xname(c.id, j)])) for j in range(1, f + 1)]
            hit = find_latency_violation(mask, c, f)
            if hit is not None:
                k, j = hit
                return service_row(c, f, k, j)
        return None

    return callback


def extract_schedule(
    instance: ProblemInstance, assignment: dict[str, float]
) -> Schedule:
    f = instance.frame_size
    slots: list[Optional[int]] = [None] * f
    for c in instance.clients:
        for j in range(1, f + 1):
            if round(assignment[xname(c.id, j)]) == 1:
                if slots[j - 1] is not None:
                    raise ValueError(f"slot {j} assigned twice in MIP solution")
                slots[j - 1] = c.id
    return Schedule(tuple(slots))


def solve_direct(
    instance: ProblemInstance,
    opts: Optional[IlpBuildOptions] = None,
    time_limit: Optional[float] = None,
    optimality_gap: float = 0.0,
):
    """Solve an instance with the monolithic ILP.

    Returns (schedule or None, MipStatus, objective Fraction or None,
    best_bound float).
    """
    f = instance.frame_size
    total_lb = sum(slot_lower_bound(c, f) for c in instance.clients)
    if total_lb > f:
        return None, MipStatus.INFEASIBLE, None, math.inf
    model = build_ilp(instance, opts)
    res = solve_mip(
        model,
        lazy=latency_lazy_callback(instance),
        time_limit=time_limit,
        optimality_gap=optimality_gap,
        bound_grid=1.0 / f,
    )
    if res.status in (MipStatus.INFEASIBLE, MipStatus.TIMED_OUT):
        return None, res.status, None, res.best_bound
    schedule = extract_schedule(instance, res.assignment)
    objective = Fraction(sum(schedule.alloc_count(c.id) for c in instance.clients), f)
    return schedule, res.status, objective, res.best_bound
