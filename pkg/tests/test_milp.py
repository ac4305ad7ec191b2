import numpy as np
import pytest

from conftest import make_instance
from mdvrp_lab.baselines import brute_force
from mdvrp_lab.core import Solution, Tour, solution_cost
from mdvrp_lab.instancegen import GenConfig, generate
from mdvrp_lab.milp import (LpParseError, build_model, check_assignment, export_lp, objective_value,
                            parse_lp, solution_assignment, xname)


def small():
    return make_instance([(0, 0), (1, 1)], [(0.2, 0.1), (0.9, 0.8), (0.5, 0.5)], [3, 4, 2], 6)


def test_model_counts():
    inst = small()
    m = build_model(inst, num_vehicles=2)
    assert m.num_vehicles == 2 and m.home == [0, 1]
    assert len(m.binaries) == 2 * 5 * 4
    assert m.continuous == ["z_2", "z_3", "z_4"]
    assert len(m.rows_named("cover_")) == 3
    assert len(m.rows_named("cap_")) == 2
    assert len(m.rows_named("mtz_")) == 2 * 3 * 2
    assert m.bounds[xname(1, 2, 0)] == (0, 0)
    assert m.bounds[xname(0, 2, 0)] == (0, 1)
    assert m.bounds["z_3"] == (4, 6)
    assert m.big_M == 9 + 4
    assert build_model(inst).num_vehicles == 2 + 2


def test_lp_round_trip():
    m = build_model(small())
    text = export_lp(m)
    assert max(len(line) for line in text.splitlines()) <= 110
    lp = parse_lp(text)
    assert lp.sense == "min"
    assert lp.objective == pytest.approx(m.objective, abs=0)
    assert [(r.name, r.sense, r.rhs) for r in lp.rows] == [(r.name, r.sense, r.rhs) for r in m.rows]
    assert all(a.coeffs == b.coeffs for a, b in zip(lp.rows, m.rows))
    assert lp.bounds == m.bounds
    assert lp.binaries == m.binaries


def test_feasible_solution_satisfies_rows():
    inst = small()
    m = build_model(inst)
    sol = Solution((Tour(0, (0, 2)), Tour(1, (1,))))
    values = solution_assignment(m, inst, sol)
    assert check_assignment(m, values) == []
    assert abs(objective_value(m, values) - solution_cost(inst, sol)) < 1e-12
    assert check_assignment(parse_lp(export_lp(m)), values) == []


def test_violations_detected():
    inst = small()
    m = build_model(inst)
    values = solution_assignment(m, inst, Solution((Tour(0, (0, 2)), Tour(1, (1,)))))
    values[xname(0, 2, 0)] = 0.0
    assert "cover_2" in check_assignment(m, values)
    over = solution_assignment(m, inst, Solution((Tour(0, (0, 1)), Tour(1, (2,)))))
    assert "cap_0" in check_assignment(m, over)


def test_parse_errors():
    with pytest.raises(LpParseError):
        parse_lp("Subject To\n c: x >= 1\nEnd\n")
    with pytest.raises(LpParseError):
        parse_lp("Minimize\n obj: x + y\nSubject To\n c: x + >= 1\nEnd\n")
    with pytest.raises(LpParseError):
        parse_lp("Minimize\n obj: x\nSubject To\n c: x + y\nEnd\n")


def test_parse_common_spellings():
    lp = parse_lp("\\ comment\nMINIMIZE\n obj: 2 x - 3.5 y\nST\n x + y >= 1\n c2: x - y < 2\n"
                  "BOUNDS\n 0 <= x <= 4\n y >= -1\n y <= inf\nBINARY\n x\nEND\n")
    assert lp.objective == {"x": 2.0, "y": -3.5}
    assert [(r.name, r.sense, r.rhs) for r in lp.rows] == [("R0", ">=", 1.0), ("c2", "<=", 2.0)]
    assert lp.bounds == {"x": (0.0, 4.0), "y": (-1.0, float("inf"))}


def solve_with_highs(lp):
    scipy_opt = pytest.importorskip("scipy.optimize")
    from scipy.sparse import lil_matrix
    names = lp.variables
    idx = {n: k for k, n in enumerate(names)}
    c = np.array([lp.objective.get(n, 0.0) for n in names])
    A = lil_matrix((len(lp.rows), len(names)))
    lo = np.full(len(lp.rows), -np.inf)
    hi = np.full(len(lp.rows), np.inf)
    for r, row in enumerate(lp.rows):
        for n, v in row.coeffs.items():
            A[r, idx[n]] = v
        if row.sense in ("<=", "="):
            hi[r] = row.rhs
        if row.sense in (">=", "="):
            lo[r] = row.rhs
    bl = np.array([lp.bounds.get(n, (0.0, np.inf))[0] for n in names])
    bu = np.array([lp.bounds.get(n, (0.0, np.inf))[1] for n in names])
    integrality = np.array([1 if n in set(lp.binaries) else 0 for n in names])
    res = scipy_opt.milp(c, constraints=scipy_opt.LinearConstraint(A.tocsr(), lo, hi),
                         bounds=scipy_opt.Bounds(bl, bu), integrality=integrality)
    assert res.success, res.message
    return res.fun


def test_external_solver_matches_oracle_one_depot_two_customers():
    inst = make_instance([(0, 0)], [(1, 0), (0, 2)], [3, 3], 5)
    assert abs(solve_with_highs(parse_lp(export_lp(build_model(inst))))
               - solution_cost(inst, brute_force(inst))) < 1e-6


@pytest.mark.parametrize("i", range(3))
def test_external_solver_matches_oracle(i):
    inst = generate(GenConfig(n_customers=4, n_depots=2, capacity=12, seed=31), i)
    opt = solve_with_highs(parse_lp(export_lp(build_model(inst))))
    assert abs(opt - solution_cost(inst, brute_force(inst))) < 1e-6
