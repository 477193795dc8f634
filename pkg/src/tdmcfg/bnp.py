"""Branch-and-price driver: node tree, branching strategies, ILP completion.

Depth-first search over (client, slot) Allocate/Forbid decisions; every
node runs column generation for its lower bound, prunes against the
incumbent with the 1/f discretization step, and may hand a sufficiently
decided node to the monolithic ILP for completion.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .colgen import (
    ColGenLimits,
    ColumnPool,
    Column,
    NodeInfeasibleError,
    column_generation,
)
from .ilp import IlpBuildOptions, solve_direct
from .mip import MipStatus
from .model import (
    DominanceClass,
    ProblemInstance,
    Schedule,
    dominance_class,
    slot_lower_bound,
)
from .verify import schedule_feasible

SEQUENTIAL = "sequential"
MAX_PROBABILITY = "max_probability"

# §-style completion thresholds by client count: fraction of f in Allocate
# decisions, and in Forbid decisions (the latter may exceed 1: a slot can
# be forbidden to many clients)
_COMPLETION_POSITIVE = {8: 0.10, 16: 0.30, 32: 0.60, 64: 0.80, 128: 0.95}
_COMPLETION_NEGATIVE = {8: 0.40, 16: 1.00, 32: 1.20, 64: 2.60, 128: 3.00}


class NoBranchError(Exception):
    """All (client, slot) pairs are already decided."""


@dataclass(frozen=True)
class BnpNode:
    decisions: tuple[tuple[int, int, bool], ...]  # (client, slot, allocate)
    depth: int = 0
    parent: Optional["BnpNode"] = None
    local_bound: float = -math.inf

    def child(self, client_id: int, slot: int, allocate: bool) -> "BnpNode":
        return BnpNode(
            self.decisions + ((client_id, slot, allocate),),
            self.depth + 1,
            self,
            self.local_bound,
        )


@dataclass
class BnpConfig:
    branching: str = "auto"  # "auto" | "sequential" | "max_probability"
    completion_positive_pct: Optional[float] = None
    completion_negative_pct: Optional[float] = None
    time_limit: Optional[float] = None
    heuristic_runs: Optional[int] = None
    seed: int = 0


@dataclass
class BnpStats:
    nodes_opened: int = 0
    nodes_pruned: int = 0
    nodes_infeasible: int = 0
    columns_generated: int = 0
    completions: int = 0
    incumbent_updates: int = 0
    heuristic_feasible: bool = False
    pruned_bounds: list = field(default_factory=list)
    node_log: list = field(default_factory=list)  # (depth, lower_bound, estimates)

    def as_dict(self) -> dict:
        return {
            "nodes_opened": self.nodes_opened,
            "nodes_pruned": self.nodes_pruned,
            "nodes_infeasible": self.nodes_infeasible,
            "columns_generated": self.columns_generated,
            "completions": self.completions,
            "incumbent_updates": self.incumbent_updates,
            "heuristic_feasible": self.heuristic_feasible,
        }


def _interpolate(table: dict[int, float], n: int) -> float:
    keys = sorted(table)
    if n <= keys[0]:
        return table[keys[0]]
    if n >= keys[-1]:
        return table[keys[-1]]
    for lo, hi in zip(keys, keys[1:]):
        if lo <= n <= hi:
            t = (n - lo) / (hi - lo)
            return table[lo] + t * (table[hi] - table[lo])
    raise AssertionError


def default_completion_thresholds(n_clients: int) -> tuple[float, float]:
    return (
        _interpolate(_COMPLETION_POSITIVE, n_clients),
        _interpolate(_COMPLETION_NEGATIVE, n_clients),
    )


def _theta_order(instance: ProblemInstance):
    f = instance.frame_size
    return sorted(instance.clients, key=lambda c: (c.effective_latency(f), c.id))


def _decided_pairs(
    node: BnpNode,
) -> tuple[dict[tuple[int, int], bool], dict[int, int]]:
    decided: dict[tuple[int, int], bool] = {}
    slot_owner: dict[int, int] = {}
    for client_id, slot, allocate in node.decisions:
        decided[(client_id, slot)] = allocate
        if allocate:
            slot_owner[slot] = client_id
    return decided, slot_owner


def branch_sequential(
    node: BnpNode, instance: ProblemInstance
) -> tuple[BnpNode, BnpNode]:
    """Next undecided pair in client-major (theta-ascending), slot-minor order.

    Returns (forbid_child, allocate_child); the Forbid child is meant to
    be explored first.
    """
    decided, slot_owner = _decided_pairs(node)
    for client in _theta_order(instance):
        for slot in range(1, instance.frame_size + 1):
            if (client.id, slot) in decided:
                continue
            if slot_owner.get(slot, client.id) != client.id:
                continue  # implicitly forbidden: slot belongs to someone else
            return (
                node.child(client.id, slot, False),
                node.child(client.id, slot, True),
            )
    raise NoBranchError


def branch_max_probability(
    node: BnpNode,
    master,
    pool: ColumnPool,
    instance: ProblemInstance,
) -> tuple[BnpNode, BnpNode]:
    """Branch on the current client's highest-probability undecided slot.

    Probability of a slot is the total master weight of the client's
    columns covering it.  Returns (allocate_child, forbid_child); the
    Allocate child is meant to be explored first.
    """
    decided, slot_owner = _decided_pairs(node)
    for client in _theta_order(instance):
        cols = pool.columns(client.id)
        totals: dict[int, float] = {}
        for k, col in enumerate(cols):
            w = master.weights.get((client.id, k), 0.0)
            if w <= 0:
                continue
            for s in col.slots():
                totals[s] = totals.get(s, 0.0) + w
        best_slot, best_p = None, 0.0
        for slot in range(1, instance.frame_size + 1):
            if (client.id, slot) in decided:
                continue
            if slot_owner.get(slot, client.id) != client.id:
                continue
            p = totals.get(slot, 0.0)
            if p > best_p + 1e-12:  # strictly greater keeps the leftmost tie
                best_slot, best_p = slot, p
        if best_slot is not None:
            return (
                node.child(client.id, best_slot, True),
                node.child(client.id, best_slot, False),
            )
    # no client has positive undecided probability mass left
    return branch_sequential(node, instance)[::-1]


def complete_with_ilp(
    node: BnpNode,
    instance: ProblemInstance,
    time_limit: Optional[float] = None,
) -> tuple[Optional[Schedule], Optional[Fraction], MipStatus]:
    """Close a node by solving the monolithic ILP under its decisions."""
    opts = IlpBuildOptions(partial_fixings=frozenset(node.decisions))
    schedule, status, objective, _ = solve_direct(
        instance, opts, time_limit=time_limit
    )
    return schedule, objective, status


def _warm_start(
    instance: ProblemInstance,
    config: BnpConfig,
    pool: ColumnPool,
    time_limit: Optional[float] = None,
):
    """Run the generative heuristic for the incumbent and seed columns."""
    from .heuristics import FEASIBLE, HeuristicConfig, generative

    runs = config.heuristic_runs
    if runs is None:
        f = instance.frame_size
        all_bd = all(
            dominance_class(c, f) == DominanceClass.BANDWIDTH_DOMINATED
            for c in instance.clients
        )
        runs = 1 if all_bd else 8
    deadline = None if time_limit is None else time.monotonic() + time_limit
    best: Optional[Schedule] = None
    best_phi: Optional[Fraction] = None
    for k in range(runs):
        budget = None
        if deadline is not None:
            budget = deadline - time.monotonic()
            if budget <= 0:
                break
        schedule, status = generative(
            instance, HeuristicConfig(seed=config.seed + k, time_limit=budget)
        )
        if status != FEASIBLE:
            continue
        phi = Fraction(
            sum(schedule.alloc_count(c.id) for c in instance.clients),
            instance.frame_size,
        )
        for client in instance.clients:
            pool.add(Column(client.id, schedule.mask(client.id)))
        if best_phi is None or phi < best_phi:
            best, best_phi = schedule, phi
    return best, best_phi


def solve_bnp(
    instance: ProblemInstance, config: Optional[BnpConfig] = None
) -> tuple[Optional[Schedule], MipStatus, Optional[Fraction], float, BnpStats]:
    """Branch-and-price search for the minimal-allocation schedule."""
    config = config or BnpConfig()
    stats = BnpStats()
    t0 = time.monotonic()
    f = instance.frame_size
    n = instance.n_clients
    total_lb = sum(slot_lower_bound(c, f) for c in instance.clients)
    if total_lb > f:
        return None, MipStatus.INFEASIBLE, None, math.inf, stats

    branching = config.branching
    if branching == "auto":
        branching = SEQUENTIAL if n <= 16 else MAX_PROBABILITY
    pos_pct, neg_pct = default_completion_thresholds(n)
    if config.completion_positive_pct is not None:
        pos_pct = config.completion_positive_pct
    if config.completion_negative_pct is not None:
        neg_pct = config.completion_negative_pct

    pool = ColumnPool()
    warm_budget = None if config.time_limit is None else config.time_limit / 3
    incumbent, incumbent_phi = _warm_start(instance, config, pool, warm_budget)
    stats.heuristic_feasible = incumbent is not None
    best_slots = int(incumbent_phi * f) if incumbent_phi is not None else f + 1
    if incumbent is not None and best_slots <= total_lb:
        # the incumbent meets the sum of per-client slot lower bounds
        return incumbent, MipStatus.OPTIMAL, incumbent_phi, float(incumbent_phi), stats
    if incumbent is None:
        # no heuristic incumbent: give the monolithic ILP one time slice
        # at the root so the search has something to prune against
        slice_limit = (
            None
            if config.time_limit is None
            else max(0.1, (config.time_limit - (time.monotonic() - t0)) / 3)
        )
        schedule, objective, status = complete_with_ilp(
            BnpNode(()), instance, slice_limit
        )
        stats.completions += 1
        if status == MipStatus.INFEASIBLE:
            return None, MipStatus.INFEASIBLE, None, math.inf, stats
        if schedule is not None:
            incumbent, incumbent_phi = schedule, objective
            best_slots = int(objective * f)
            stats.incumbent_updates += 1
            for client in instance.clients:
                pool.add(Column(client.id, schedule.mask(client.id)))
            if status == MipStatus.OPTIMAL:
                return (
                    incumbent,
                    MipStatus.OPTIMAL,
                    incumbent_phi,
                    float(incumbent_phi),
                    stats,
                )

    # root: slot 1 goes to the client with the tightest latency requirement
    root_decisions: tuple = ()
    tight = _theta_order(instance)[0]
    if slot_lower_bound(tight, f) >= 1:
        root_decisions = ((tight.id, 1, True),)
    root = BnpNode(root_decisions)

    def timed_out() -> bool:
        return (
            config.time_limit is not None
            and time.monotonic() - t0 > config.time_limit
        )

    def remaining() -> Optional[float]:
        if config.time_limit is None:
            return None
        return max(0.1, config.time_limit - (time.monotonic() - t0))

    stack: list[BnpNode] = [root]
    open_bound_floor = math.inf
    ran_out = False
    while stack:
        if timed_out():
            ran_out = True
            break
        node = stack.pop()
        ub_slots = best_slots if incumbent is not None else f + 1
        stats.nodes_opened += 1
        limits = ColGenLimits(
            upper_bound=(ub_slots - 1 + 1e-9) / f,
            time_limit=remaining(),
        )
        try:
            res = column_generation(pool, node, instance, limits)
        except NodeInfeasibleError:
            stats.nodes_infeasible += 1
            continue
        stats.columns_generated += res.columns_added
        stats.node_log.append((node.depth, res.lower_bound, list(res.lagrangian_estimates)))
        lb_slots = math.ceil(res.lower_bound * f - 1e-6)
        if incumbent is not None and lb_slots >= best_slots:
            stats.nodes_pruned += 1
            stats.pruned_bounds.append(res.lower_bound)
            continue
        if res.status == "timed_out":
            ran_out = True
            open_bound_floor = min(open_bound_floor, res.lower_bound)
            break
        master = res.master
        if (
            res.status == "optimal"
            and master.is_integral()
            and master.conflict_free()
        ):
            chosen = master.chosen_columns(pool)
            if len(chosen) == n:
                schedule = Schedule.from_masks(
                    f, {cid: col.mask for cid, col in chosen.items()}
                )
                phi = Fraction(
                    sum(col.slot_count for col in chosen.values()), f
                )
                if schedule_feasible(schedule, instance).feasible and (
                    incumbent is None or phi * f < best_slots
                ):
                    incumbent, incumbent_phi = schedule, phi
                    best_slots = int(phi * f)
                    stats.incumbent_updates += 1
                continue  # LP optimum of the node achieved integrally
        positives = sum(1 for _, _, a in node.decisions if a)
        negatives = sum(1 for _, _, a in node.decisions if not a)
        if node.decisions and (
            positives >= pos_pct * f or negatives >= neg_pct * f
        ):
            stats.completions += 1
            schedule, objective, status = complete_with_ilp(
                node, instance, remaining()
            )
            if status == MipStatus.TIMED_OUT:
                ran_out = True
                open_bound_floor = min(open_bound_floor, res.lower_bound)
                break
            if schedule is not None and (
                incumbent is None or objective * f < best_slots
            ):
                incumbent, incumbent_phi = schedule, objective
                best_slots = int(objective * f)
                stats.incumbent_updates += 1
            continue
        node = BnpNode(node.decisions, node.depth, node.parent, res.lower_bound)
        try:
            if branching == SEQUENTIAL:
                first, second = branch_sequential(node, instance)
            else:
                first, second = branch_max_probability(
                    node, master, pool, instance
                )
        except NoBranchError:
            continue  # fully decided and not integral: nothing better here
        stack.append(second)
        stack.append(first)

    if ran_out:
        for nd in stack:
            open_bound_floor = min(open_bound_floor, nd.local_bound)
        bound = open_bound_floor if math.isfinite(open_bound_floor) else -math.inf
        if incumbent is None:
            return None, MipStatus.TIMED_OUT, None, bound, stats
        return incumbent, MipStatus.FEASIBLE, incumbent_phi, bound, stats
    if incumbent is None:
        return None, MipStatus.INFEASIBLE, None, math.inf, stats
    return incumbent, MipStatus.OPTIMAL, incumbent_phi, float(incumbent_phi), stats
