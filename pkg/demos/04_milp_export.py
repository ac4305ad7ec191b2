"""
The MILP model as LP text
=========================

Export the vehicle-indexed model, read it back, and check that a
heuristic solution satisfies every row with matching objective.
If scipy is installed, solve the tiny model with HiGHS as well.
"""
from mdvrp_lab import GenConfig, generate, solution_cost
from mdvrp_lab.baselines import brute_force, cluster_savings
from mdvrp_lab.milp import (build_model, check_assignment, export_lp, objective_value, parse_lp,
                            solution_assignment)

inst = generate(GenConfig(n_customers=4, n_depots=2, capacity=12, seed=31))
model = build_model(inst)
text = export_lp(model)
print("\n".join(text.splitlines()[:6]), "\n...")
print(f"{len(model.binaries)} binaries, {len(model.continuous)} loads, {len(model.rows)} rows")

lp = parse_lp(text)
sol = cluster_savings(inst)
values = solution_assignment(model, inst, sol)
print("violated rows:", check_assignment(lp, values))
print("objective", objective_value(lp, values), "= solution cost", solution_cost(inst, sol))

try:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
except ImportError:
    print("scipy not installed; skipping the HiGHS solve")
else:
    names = lp.variables
    col = {n: k for k, n in enumerate(names)}
    A = np.zeros((len(lp.rows), len(names)))
    lo, hi = np.full(len(lp.rows), -np.inf), np.full(len(lp.rows), np.inf)
    for r, row in enumerate(lp.rows):
        for n, c in row.coeffs.items():
            A[r, col[n]] = c
        if row.sense != ">=":
            hi[r] = row.rhs
        if row.sense != "<=":
            lo[r] = row.rhs
    b = [lp.bounds.get(n, (0, np.inf)) for n in names]
    res = milp([lp.objective.get(n, 0.0) for n in names], constraints=LinearConstraint(A, lo, hi),
               bounds=Bounds([x[0] for x in b], [x[1] for x in b]),
               integrality=[n in set(lp.binaries) for n in names])
    print("HiGHS optimum", res.fun, "| oracle", solution_cost(inst, brute_force(inst)))
