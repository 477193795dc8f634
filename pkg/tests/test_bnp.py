"""Branch-and-price driver: branching, completion, warm start, bounds."""

import math
import random
from fractions import Fraction

import pytest

from tdmcfg.bnp import (
    BnpConfig,
    BnpNode,
    MAX_PROBABILITY,
    SEQUENTIAL,
    branch_sequential,
    default_completion_thresholds,
    solve_bnp,
)
from tdmcfg.mip import MipStatus
from tdmcfg.model import ClientRequirement, ProblemInstance
from tdmcfg.verify import brute_force_optimum, schedule_feasible

from conftest import random_instance


def test_node_child_extends_decisions():
    root = BnpNode(())
    child = root.child(1, 3, True)
    assert child.decisions == ((1, 3, True),)
    assert child.depth == 1
    assert child.parent is root


def test_branch_sequential_forbid_first(golden_instance):
    node = BnpNode(())
    first, second = branch_sequential(node, golden_instance)
    # same (client, slot) pair, Forbid explored before Allocate
    assert first.decisions[-1][:2] == second.decisions[-1][:2]
    assert first.decisions[-1][2] is False
    assert second.decisions[-1][2] is True


def test_completion_thresholds_interpolate():
    pos8, neg8 = default_completion_thresholds(8)
    assert pos8 == pytest.approx(0.10)
    assert neg8 == pytest.approx(0.40)
    pos12, _ = default_completion_thresholds(12)
    assert 0.10 < pos12 < 0.30
    pos_big, _ = default_completion_thresholds(1000)
    assert pos_big == pytest.approx(0.95)


@pytest.mark.parametrize("branching", [SEQUENTIAL, MAX_PROBABILITY])
def test_solve_bnp_golden_optimum(golden_instance, branching):
    schedule, status, objective, bound, stats = solve_bnp(
        golden_instance, BnpConfig(branching=branching, seed=0, time_limit=60)
    )
    assert status == MipStatus.OPTIMAL
    assert objective == Fraction(4, 5)
    assert bound == pytest.approx(0.8)
    assert schedule_feasible(schedule, golden_instance).feasible


def test_solve_bnp_infeasible_instance():
    clients = tuple(
        ClientRequirement(i, f"c{i}", Fraction(1, 2), None) for i in (1, 2, 3)
    )
    inst = ProblemInstance(4, clients)
    schedule, status, objective, bound, _ = solve_bnp(inst, BnpConfig(seed=0))
    assert status == MipStatus.INFEASIBLE
    assert schedule is None
    assert math.isinf(bound)


def test_solve_bnp_matches_brute_force_on_small_instances():
    rng = random.Random(21)
    for _ in range(8):
        inst = random_instance(rng, max_frame=8)
        _, bf_obj = brute_force_optimum(inst)
        schedule, status, objective, _, _ = solve_bnp(
            inst, BnpConfig(seed=0, time_limit=60)
        )
        if bf_obj is None:
            assert status == MipStatus.INFEASIBLE
        else:
            assert status == MipStatus.OPTIMAL
            assert objective == bf_obj


def test_solve_bnp_time_limit_returns_promptly(golden_instance):
    import time

    t0 = time.monotonic()
    _, status, _, _, _ = solve_bnp(
        golden_instance, BnpConfig(seed=0, time_limit=0.01)
    )
    assert time.monotonic() - t0 < 30
    assert status in (
        MipStatus.OPTIMAL,
        MipStatus.FEASIBLE,
        MipStatus.TIMED_OUT,
    )


def test_solve_bnp_stats_are_populated(golden_instance):
    _, status, _, _, stats = solve_bnp(golden_instance, BnpConfig(seed=0))
    assert status == MipStatus.OPTIMAL
    d = stats.as_dict()
    assert "nodes_opened" in d and "columns_generated" in d
    for _, lb, estimates in stats.node_log:
        for est in estimates:
            assert est <= lb + 1e-9
