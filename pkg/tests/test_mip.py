"""LP/MIP kernel: duals, branch-and-bound, lazy rows, time limits."""

import math

import pytest

from tdmcfg.mip import (
    Constraint,
    LinearModel,
    LpStatus,
    MipStatus,
    ModelError,
    Variable,
    solve_lp,
    solve_mip,
)


def knapsack_model():
    # min -8x1 - 11x2 - 6x3  s.t.  5x1 + 7x2 + 4x3 <= 14, x binary
    variables = [
        Variable("x1", 0, 1, -8.0, is_integer=True),
        Variable("x2", 0, 1, -11.0, is_integer=True),
        Variable("x3", 0, 1, -6.0, is_integer=True),
    ]
    cons = [
        Constraint("cap", (("x1", 5.0), ("x2", 7.0), ("x3", 4.0)), "<=", 14.0)
    ]
    return LinearModel(variables, cons)


def test_solve_lp_optimal_with_duals():
    variables = [Variable("x", 0, 10, 1.0), Variable("y", 0, 10, 2.0)]
    cons = [Constraint("lo", (("x", 1.0), ("y", 1.0)), ">=", 4.0)]
    lp = solve_lp(LinearModel(variables, cons))
    assert lp.status == LpStatus.OPTIMAL
    assert lp.objective == pytest.approx(4.0)
    assert lp.primal["x"] == pytest.approx(4.0)
    # reduced cost of x at its optimal basis is zero: c_x = dual * a_x
    assert lp.duals["lo"] * 1.0 == pytest.approx(1.0)


def test_solve_lp_infeasible():
    variables = [Variable("x", 0, 1, 1.0)]
    cons = [Constraint("hi", (("x", 1.0),), ">=", 2.0)]
    lp = solve_lp(LinearModel(variables, cons))
    assert lp.status == LpStatus.INFEASIBLE


def test_solve_mip_knapsack_optimum():
    res = solve_mip(knapsack_model())
    assert res.status == MipStatus.OPTIMAL
    assert res.objective == pytest.approx(-19.0)
    assert round(res.assignment["x1"]) == 1
    assert round(res.assignment["x2"]) == 1
    assert round(res.assignment["x3"]) == 0


def test_solve_mip_respects_integrality():
    # LP relaxation is fractional; MIP must branch to an integer point
    variables = [Variable("x", 0, 5, -1.0, is_integer=True)]
    cons = [Constraint("cap", (("x", 2.0),), "<=", 7.0)]
    res = solve_mip(LinearModel(variables, cons))
    assert res.status == MipStatus.OPTIMAL
    assert res.assignment["x"] == pytest.approx(3.0)


def test_solve_mip_infeasible():
    variables = [Variable("x", 0, 1, 1.0, is_integer=True)]
    cons = [Constraint("hi", (("x", 1.0),), ">=", 2.0)]
    res = solve_mip(LinearModel(variables, cons))
    assert res.status == MipStatus.INFEASIBLE


def test_solve_mip_lazy_rows_are_global():
    # lazy cut forbids the initial optimum x1=x2=1; solver must re-solve
    variables = [
        Variable("x1", 0, 1, -1.0, is_integer=True),
        Variable("x2", 0, 1, -1.0, is_integer=True),
    ]
    model = LinearModel(variables, [])
    calls = []

    def lazy(assignment):
        if round(assignment["x1"]) == 1 and round(assignment["x2"]) == 1:
            calls.append(dict(assignment))
            return Constraint("cut", (("x1", 1.0), ("x2", 1.0)), "<=", 1.0)
        return None

    res = solve_mip(model, lazy=lazy)
    assert res.status == MipStatus.OPTIMAL
    assert calls, "lazy callback never fired"
    assert res.objective == pytest.approx(-1.0)
    assert round(res.assignment["x1"]) + round(res.assignment["x2"]) == 1


def test_solve_mip_bound_grid_snaps_bound():
    # objective values live on a 0.5 grid; pruning may use the snapped bound
    variables = [
        Variable("x1", 0, 1, 0.5, is_integer=True),
        Variable("x2", 0, 1, 0.5, is_integer=True),
    ]
    cons = [Constraint("lo", (("x1", 1.0), ("x2", 1.0)), ">=", 1.2)]
    res = solve_mip(LinearModel(variables, cons), bound_grid=0.5)
    assert res.status == MipStatus.OPTIMAL
    assert res.objective == pytest.approx(1.0)


def test_solve_mip_time_limit_reports_timeout():
    # zero budget: the solver must give up gracefully
    res = solve_mip(knapsack_model(), time_limit=-1.0)
    assert res.status == MipStatus.TIMED_OUT
    assert res.best_bound <= -19.0 + 1e-9 or math.isinf(res.best_bound)


def test_solve_mip_optimality_gap_accepts_near_optimal():
    res = solve_mip(knapsack_model(), optimality_gap=0.5)
    assert res.status in (MipStatus.OPTIMAL, MipStatus.FEASIBLE)
    assert res.objective <= -19.0 * 0.5


def test_lazy_equality_rejected():
    variables = [Variable("x", 0, 1, -1.0, is_integer=True)]
    model = LinearModel(variables, [])

    def lazy(assignment):
        return Constraint("eq", (("x", 1.0),), "==", 0.0)

    with pytest.raises(ModelError):
        solve_mip(model, lazy=lazy)
