"""
Three-step training at desk scale
=================================

1. pretrain the attention TSP router on random 20-node point sets,
2. train the partitioner with that router frozen,
3. fine-tune the router on tours taken from the partitioner.

Set DEMO_SCALE=full for the acceptance-sized run (a few minutes);
the default is a quick smoke-sized run.
"""
import os
import time

import numpy as np

from mdvrp_lab import GenConfig, generate, solution_cost
from mdvrp_lab.baselines import random_partition
from mdvrp_lab.nn import no_grad, save
from mdvrp_lab.partitioner import decode_batch, init_partitioner_params
from mdvrp_lab.router import route_solution
from mdvrp_lab.training import (TrainConfig, step1_tsp_pretrain, step2_partitioner,
                                step3_router_finetune)

full = os.environ.get("DEMO_SCALE") == "full"
scale = {} if full else dict(epochs=3, batches_per_epoch=5, batch_size=32, eval_set_size=64)

t0 = time.time()
router, log1 = step1_tsp_pretrain(TrainConfig(step=1, **scale))
print("step 1 eval length by epoch:", [round(float(r["eval_cost"]), 3) for r in log1])

cfg = TrainConfig(step=2, **scale)
partitioner, log2 = step2_partitioner(cfg, router)
print("step 2 eval cost by epoch:  ", [round(float(r["eval_cost"]), 3) for r in log2])

router2, log3 = step3_router_finetune(TrainConfig(step=3, **scale), partitioner, router)
print("step 3 eval length by epoch:", [round(float(r["eval_cost"]), 3) for r in log3])
print(f"training took {time.time() - t0:.0f}s")

# compare on fresh instances, every tour ordered by 2-opt
held = [generate(GenConfig(n_customers=20, n_depots=2, capacity=30, seed=4242), i) for i in range(100)]
init = init_partitioner_params(np.random.default_rng(0))
for name, params in [("untrained", init), ("trained", partitioner)]:
    with no_grad():
        parts, _ = decode_batch(params, held, cfg.k)
    print(f"{name:10s} partitioner mean cost",
          round(np.mean([solution_cost(i, route_solution(i, p)) for i, p in zip(held, parts)]), 4))
print("random partition mean cost",
      round(np.mean([solution_cost(i, random_partition(i, j)) for j, i in enumerate(held)]), 4))

save(router2, "router.ckpt")
save(partitioner, "partitioner.ckpt")
print("saved router.ckpt and partitioner.ckpt")
