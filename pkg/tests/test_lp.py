import math

import pytest

from signalcraft.lp import LpError, LpProblem, dump_lp, solve_lp
from signalcraft.model import make_example3
from signalcraft.oracle import brute_force_public_optimal
from signalcraft.public_exact import build_lp1


def simple_max() -> LpProblem:
    lp = LpProblem(num_vars=1, objective=[(0, 1.0)], sense="max")
    lp.add_constraint([(0, 1.0)], "<=", 1.0)
    return lp


def test_simple_optimal():
    sol = solve_lp(simple_max())
    assert sol.status == "optimal"
    assert sol.values[0] == pytest.approx(1.0)
    assert sol.objective_value == pytest.approx(1.0)


def test_infeasible():
    lp = LpProblem(num_vars=1, objective=[(0, 1.0)], sense="max")
    lp.add_constraint([(0, 1.0)], ">=", 2.0)
    lp.add_constraint([(0, 1.0)], "<=", 1.0)
    sol = solve_lp(lp)
    assert sol.status == "infeasible"


def test_unbounded():
    lp = LpProblem(num_vars=1, objective=[(0, 1.0)], sense="max")
    sol = solve_lp(lp)
    assert sol.status == "unbounded"


def test_reject_non_finite():
    lp = LpProblem(num_vars=1, objective=[(0, float("nan"))], sense="max")
    with pytest.raises(LpError):
        solve_lp(lp)
    lp = LpProblem(num_vars=1, objective=[(0, 1.0)], sense="max")
    lp.add_constraint([(0, math.inf)], "<=", 1.0)
    with pytest.raises(LpError):
        solve_lp(lp)
    lp = LpProblem(num_vars=2, objective=[(5, 1.0)])
    with pytest.raises(LpError):
        solve_lp(lp)


def test_lp1_matches_brute_force_oracle():
    inst = make_example3(0.1)
    sol = solve_lp(build_lp1(inst))
    assert sol.status == "optimal"
    _, oracle_value = brute_force_public_optimal(inst)
    assert sol.objective_value == pytest.approx(oracle_value, abs=1e-7)


def test_objective_round_trip():
    inst = make_example3(0.1)
    lp = build_lp1(inst)
    sol = solve_lp(lp)
    assert abs(sol.evaluate(lp) - sol.objective_value) <= 1e-9


def test_objective_scaling():
    lp = build_lp1(make_example3(0.1))
    base = solve_lp(lp)
    scaled = LpProblem(
        num_vars=lp.num_vars,
        objective=[(i, 3.0 * c) for i, c in lp.objective],
        sense="max",
        constraints=list(lp.constraints),
        bounds=lp.bounds,
    )
    sol = solve_lp(scaled)
    assert sol.objective_value == pytest.approx(3.0 * base.objective_value, rel=1e-9)
    # the base argmax stays feasible in the scaled problem
    for con in scaled.constraints:
        lhs = sum(coef * base.values[idx] for idx, coef in con.coeffs)
        if con.relation == "<=":
            assert lhs <= con.rhs + 1e-7
        elif con.relation == ">=":
            assert lhs >= con.rhs - 1e-7
        else:
            assert lhs == pytest.approx(con.rhs, abs=1e-7)


def test_feasibility_tolerance():
    inst = make_example3(0.1)
    lp = build_lp1(inst)
    sol = solve_lp(lp)
    for con in lp.constraints:
        lhs = sum(coef * sol.values[idx] for idx, coef in con.coeffs)
        if con.relation == "<=":
            assert lhs <= con.rhs + 1e-7
        elif con.relation == ">=":
            assert lhs >= con.rhs - 1e-7
        else:
            assert abs(lhs - con.rhs) <= 1e-7


def test_dump_lp(tmp_path):
    path = tmp_path / "problem.lp"
    dump_lp(simple_max(), path)
    text = path.read_text()
    assert "maximize" in text
    assert "subject to" in text
    assert "bounds" in text
    assert "x0" in text
