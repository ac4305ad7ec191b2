"""
Instances, the exact oracle and two classic heuristics
======================================================

Generate a small multi-depot instance, solve it exactly, and compare with
nearest-depot clustering + savings and with a random partition.
"""
from mdvrp_lab import GenConfig, generate, solution_cost, validate
from mdvrp_lab.baselines import brute_force, cluster_savings, random_partition
from mdvrp_lab.core import max_tours

# 7 customers, 2 depots, capacity 15: small enough for the exhaustive oracle
inst = generate(GenConfig(n_customers=7, n_depots=2, capacity=15, seed=3))
print(inst.id, "total demand", inst.total_demand, "tour limit", max_tours(inst))

solvers = {"oracle": brute_force, "cluster+savings": cluster_savings,
           "random partition": random_partition}
for name, solve in solvers.items():
    sol = solve(inst)
    assert validate(inst, sol).is_feasible
    print(f"{name:18s} cost {solution_cost(inst, sol):.4f}  tours {sol.n_opened}")
    for t in sol.nonempty():
        print("    depot", t.depot_index, "->", list(t.visits))

# Clustering commits every customer to its nearest depot before routing.
# Over many instances that shortcut loses to the optimum quite often:
worse = 0
for i in range(50):
    x = generate(GenConfig(n_customers=6, n_depots=2, capacity=15, seed=10), i)
    worse += solution_cost(x, cluster_savings(x)) > solution_cost(x, brute_force(x)) + 1e-9
print(f"cluster+savings strictly suboptimal on {worse}/50 instances")
