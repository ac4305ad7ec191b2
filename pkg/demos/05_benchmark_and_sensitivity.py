"""
Benchmark table and neighbourhood-size sensitivity
==================================================

Both harnesses emit CSV.  Pass a trained partitioner checkpoint as the
first argument (see 03_three_step_training.py); otherwise untrained
parameters are used so the script still runs.
"""
import sys

import numpy as np

from mdvrp_lab import GenConfig, generate
from mdvrp_lab.baselines import brute_force, cluster_savings, random_partition
from mdvrp_lab.bench import bench, bench_csv, sensitivity, sensitivity_csv
from mdvrp_lab.nn import load
from mdvrp_lab.partitioner import init_partitioner_params, parallel_k, resolve_k

params = load(sys.argv[1]) if len(sys.argv) > 1 else init_partitioner_params(np.random.default_rng(0))

tiny = [generate(GenConfig(n_customers=7, n_depots=2, capacity=15, seed=5), i) for i in range(5)]
methods = {
    "oracle": brute_force,
    "cluster": cluster_savings,
    "random": random_partition,
    "learned": lambda inst: parallel_k(inst, params, [resolve_k(p, inst.n_customers) for p in (30, 50)]),
}
print(bench_csv(bench(tiny, methods, reference="oracle")))

mid = [generate(GenConfig(n_customers=20, n_depots=2, capacity=30, seed=6), i) for i in range(10)]
rows = sensitivity(mid, [30.0, 50.0, 100.0], params)
print("".join(line + "\n" for line in sensitivity_csv(rows).splitlines()[-4:]))
