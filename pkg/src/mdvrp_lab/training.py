"""REINFORCE with a greedy rollout baseline and the three-step curriculum.

1. pretrain the TSP router on random point sets,
2. train the partitioner with the router frozen (cost = routed length of every tour),
3. fine-tune the router on tours harvested from greedy partitions.

Every step returns its final rollout baseline, i.e. the parameters with the
best greedy eval cost seen (the initial ones if no epoch improved), rather
than the last iterate.  Per-epoch checkpoints still hold the last iterate.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import Instance, Tour
from .env import tour_points
from .instancegen import GenConfig, generate, rng_for
from .nn import ParamSet, Tensor, no_grad, save
from .partitioner import decode_batch, init_partitioner_params
from .tsp_policy import PaddedBatch, init_tsp_params, tsp_decode

log = logging.getLogger(__name__)

# stream identifiers for derived seeds
_TRAIN, _EVAL, _SAMPLE = 1, 2, 3


class TrainStep(int, enum.Enum):
    TSP_PRETRAIN = 1
    PARTITIONER = 2
    ROUTER_FINETUNE = 3


class TrainingDiverged(RuntimeError):
    pass


# The partitioner's REINFORCE signal is much noisier than the router's; at 1e-3
# its greedy eval cost oscillates by >10% between epochs, at 3e-4 it descends.
STEP_LEARNING_RATES = {TrainStep.TSP_PRETRAIN: 1e-3, TrainStep.PARTITIONER: 3e-4,
                       TrainStep.ROUTER_FINETUNE: 1e-3}


@dataclass
class TrainConfig:
    step: TrainStep = TrainStep.TSP_PRETRAIN
    epochs: int = 20
    batches_per_epoch: int = 20
    batch_size: int = 64
    n_customers: int = 20
    n_depots: int = 2
    capacity: int = 30
    tsp_nodes: int = 20
    k: int = 10
    sample_tours: bool = False
    learning_rate: float | None = None  # None: STEP_LEARNING_RATES[step]
    grad_clip: float = 1.0
    eval_set_size: int = 256
    seed: int = 1234
    dim: int = 32
    layers: int = 2
    heads: int = 4
    log_path: str | None = None
    checkpoint_dir: str | None = None

    def __post_init__(self):
        self.step = TrainStep(self.step)
        if self.learning_rate is None:
            self.learning_rate = STEP_LEARNING_RATES[self.step]
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 0 or self.batches_per_epoch < 1:
            raise ValueError("epochs must be >= 0 and batches_per_epoch >= 1")

    def gen_config(self, seed: int) -> GenConfig:
        return GenConfig(n_customers=self.n_customers, n_depots=self.n_depots,
                         capacity=self.capacity, seed=seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["step"] = int(self.step)
        return out


# -- optimisation primitives ------------------------------------------------------------

def reinforce_loss(costs, baseline_costs, log_probs: Tensor) -> Tensor:
    """(1/B) sum_i (cost_i - baseline_i) * log p_i, advantages held constant."""
    costs = np.asarray(costs, dtype=np.float64)
    baseline_costs = np.asarray(baseline_costs, dtype=np.float64)
    if costs.shape != baseline_costs.shape or costs.shape != log_probs.shape:
        raise ValueError("costs, baseline_costs and log_probs must have equal length")
    adv = costs - baseline_costs
    return (log_probs * adv).sum() * (1.0 / len(costs))


def reinforce_grad(costs, baseline_costs, log_probs: Tensor, params: ParamSet) -> dict[str, np.ndarray]:
    """Gradient of :func:`reinforce_loss` for every tensor in ``params``."""
    params.zero_grad()
    loss = reinforce_loss(costs, baseline_costs, log_probs)
    if not np.isfinite(loss.data):
        raise TrainingDiverged(f"non-finite loss {loss.data}")
    loss.backward()
    return {k: (np.zeros_like(v.data) if v.grad is None else v.grad.copy()) for k, v in params.items()}


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params: ParamSet, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """In-place Adam step with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {name} shape {p.data.shape}")
        m = state.m.get(name, np.zeros_like(g))
        v = state.v.get(name, np.zeros_like(g))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - b1 ** state.t)
        v_hat = v / (1 - b2 ** state.t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


def clip_grads(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``; returns the norm."""
    norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm > 0 and norm > max_norm:
        for g in grads.values():
            g *= max_norm / norm
    return norm


def baseline_refresh(current: ParamSet, baseline: ParamSet,
                     evaluate: Callable[[ParamSet], float]) -> tuple[ParamSet, bool]:
    """Copy ``current`` into a new baseline iff its greedy mean cost is strictly lower."""
    if evaluate(current) < evaluate(baseline):
        return current.copy(), True
    return baseline, False


# -- cost helpers ---------------------------------------------------------------------------

def random_tsp_batch(rng: np.random.Generator, batch: int, nodes: int) -> PaddedBatch:
    return PaddedBatch.from_points(list(rng.random((batch, nodes, 2))))


def tsp_greedy_lengths(router: ParamSet, batch: PaddedBatch, chunk: int = 512) -> np.ndarray:
    out = []
    with no_grad():
        for s in range(0, len(batch.lengths), chunk):
            sub = PaddedBatch(batch.coords[s:s + chunk], batch.lengths[s:s + chunk])
            out.append(tsp_decode(router, sub, greedy=True)[1])
    return np.concatenate(out)


def tour_batch(instances: Sequence[Instance], partitions: Sequence[Sequence[Tour]]) -> tuple[PaddedBatch, np.ndarray]:
    """All nonempty tours as a padded batch plus the owning instance of each row."""
    pts, owner = [], []
    for b, (inst, part) in enumerate(zip(instances, partitions)):
        for t in part:
            if t.visits:
                pts.append(tour_points(inst, t))
                owner.append(b)
    return PaddedBatch.from_points(pts), np.array(owner, dtype=np.int64)


def partition_costs(router: ParamSet, instances: Sequence[Instance],
                    partitions: Sequence[Sequence[Tour]]) -> np.ndarray:
    """Per-instance total length with every tour routed greedily by the neural router."""
    batch, owner = tour_batch(instances, partitions)
    lengths = tsp_greedy_lengths(router, batch)
    return np.bincount(owner, weights=lengths, minlength=len(instances))


def greedy_partitions(params: ParamSet, instances: Sequence[Instance], k: int,
                      chunk: int = 128) -> list[list[Tour]]:
    out = []
    with no_grad():
        for s in range(0, len(instances), chunk):
            out += decode_batch(params, instances[s:s + chunk], k)[0]
    return out


def mdvrp_instances(cfg: TrainConfig, stream: int, start: int, count: int) -> list[Instance]:
    gen = cfg.gen_config(cfg.seed * 7 + stream)
    return [generate(gen, start + i) for i in range(count)]


# -- logging / checkpoints ----------------------------------------------------------------

LOG_FIELDS = ("epoch", "train_cost", "eval_cost", "baseline_refreshed")


class _Run:
    def __init__(self, cfg: TrainConfig, tag: str):
        self.cfg, self.tag = cfg, tag
        self.rows: list[dict] = []
        if cfg.checkpoint_dir:
            Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)

    def record(self, epoch: int, train_cost: float, eval_cost: float, refreshed: bool,
               params: ParamSet) -> None:
        row = {"epoch": epoch, "train_cost": repr(float(train_cost)),
               "eval_cost": repr(float(eval_cost)), "baseline_refreshed": int(refreshed)}
        self.rows.append(row)
        log.info("%s epoch %d train %.5f eval %.5f refreshed %s", self.tag, epoch,
                 train_cost, eval_cost, refreshed)
        if self.cfg.log_path:
            with open(self.cfg.log_path, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
                w.writeheader()
                w.writerows(self.rows)
        if self.cfg.checkpoint_dir:
            save(params, Path(self.cfg.checkpoint_dir) / f"{self.tag}_epoch{epoch:03d}.ckpt")


def _check_finite(values: np.ndarray, what: str, epoch: int, batch: int) -> None:
    if not np.all(np.isfinite(values)):
        raise TrainingDiverged(f"non-finite {what} at epoch {epoch} batch {batch}")


def _update(params: ParamSet, costs, base, logp: Tensor, adam: AdamState, cfg: TrainConfig,
            epoch: int, batch: int) -> None:
    _check_finite(np.asarray(costs), "costs", epoch, batch)
    _check_finite(logp.data, "log-probabilities", epoch, batch)
    grads = reinforce_grad(costs, base, logp, params)
    norm = clip_grads(grads, cfg.grad_clip)
    if not np.isfinite(norm):
        raise TrainingDiverged(f"non-finite gradient norm at epoch {epoch} batch {batch}")
    adam_update(params, grads, adam, cfg.learning_rate)
    params.zero_grad()


# -- step 1 ------------------------------------------------------------------------------

def step1_tsp_pretrain(cfg: TrainConfig, init: ParamSet | None = None) -> tuple[ParamSet, list[dict]]:
    router = init.copy() if init is not None else init_tsp_params(
        rng_for(cfg.seed, 0), cfg.dim, cfg.layers, cfg.heads)
    baseline = router.copy()
    eval_set = random_tsp_batch(rng_for(cfg.seed * 7 + _EVAL, 0), cfg.eval_set_size, cfg.tsp_nodes)

    def evaluate(p):
        return float(tsp_greedy_lengths(p, eval_set).mean())

    return _train_router(cfg, router, baseline, evaluate, lambda epoch, b: random_tsp_batch(
        rng_for(cfg.seed * 7 + _TRAIN, epoch * 100_003 + b), cfg.batch_size, cfg.tsp_nodes), "step1")


def _train_router(cfg, router, baseline, evaluate, make_batch, tag):
    adam = AdamState()
    run = _Run(cfg, tag)
    for epoch in range(cfg.epochs):
        costs_seen = []
        for b in range(cfg.batches_per_epoch):
            batch = make_batch(epoch, b)
            rng = rng_for(cfg.seed * 7 + _SAMPLE, epoch * 100_003 + b)
            _, lengths, logp = tsp_decode(router, batch, greedy=False, rng=rng)
            base = tsp_greedy_lengths(baseline, batch)
            _update(router, lengths, base, logp, adam, cfg, epoch, b)
            costs_seen.append(lengths.mean())
        baseline, refreshed = baseline_refresh(router, baseline, evaluate)
        run.record(epoch, float(np.mean(costs_seen)), evaluate(router), refreshed, router)
    return baseline, run.rows


# -- step 2 ------------------------------------------------------------------------------

def step2_partitioner(cfg: TrainConfig, frozen_router: ParamSet,
                      init: ParamSet | None = None) -> tuple[ParamSet, list[dict]]:
    """Train the partitioner; ``frozen_router`` is only read."""
    policy = init.copy() if init is not None else init_partitioner_params(
        rng_for(cfg.seed, 1), cfg.dim, cfg.layers, cfg.heads)
    baseline = policy.copy()
    eval_set = mdvrp_instances(cfg, _EVAL, 0, cfg.eval_set_size)

    def evaluate(p):
        parts = greedy_partitions(p, eval_set, cfg.k)
        return float(partition_costs(frozen_router, eval_set, parts).mean())

    adam = AdamState()
    run = _Run(cfg, "step2")
    for epoch in range(cfg.epochs):
        costs_seen = []
        for b in range(cfg.batches_per_epoch):
            insts = mdvrp_instances(cfg, _TRAIN, (epoch * cfg.batches_per_epoch + b) * cfg.batch_size,
                                    cfg.batch_size)
            rngs = [rng_for(cfg.seed * 7 + _SAMPLE, (epoch * 100_003 + b) * 4096 + i)
                    for i in range(len(insts))]
            parts, logp = decode_batch(policy, insts, cfg.k, greedy=False, rngs=rngs,
                                       sample_tours=cfg.sample_tours)
            costs = partition_costs(frozen_router, insts, parts)
            base = partition_costs(frozen_router, insts, greedy_partitions(baseline, insts, cfg.k))
            _update(policy, costs, base, logp, adam, cfg, epoch, b)
            costs_seen.append(costs.mean())
        baseline, refreshed = baseline_refresh(policy, baseline, evaluate)
        run.record(epoch, float(np.mean(costs_seen)), evaluate(policy), refreshed, policy)
    return baseline, run.rows


# -- step 3 ------------------------------------------------------------------------------

def harvest_tours(partitioner: ParamSet, instances: Sequence[Instance], k: int) -> PaddedBatch:
    parts = greedy_partitions(partitioner, instances, k)
    return tour_batch(instances, parts)[0]


def step3_router_finetune(cfg: TrainConfig, partitioner: ParamSet,
                          router: ParamSet) -> tuple[ParamSet, list[dict]]:
    """Fine-tune ``router`` (a copy is returned) on tours of greedy partitions."""
    router = router.copy()
    baseline = router.copy()
    eval_tours = harvest_tours(partitioner, mdvrp_instances(cfg, _EVAL, 0, cfg.eval_set_size), cfg.k)

    def evaluate(p):
        return float(tsp_greedy_lengths(p, eval_tours).mean())

    # instances per batch so that a batch holds roughly batch_size tours
    per_batch = max(1, cfg.batch_size // 4)

    def make_batch(epoch, b):
        start = (epoch * cfg.batches_per_epoch + b) * per_batch
        return harvest_tours(partitioner, mdvrp_instances(cfg, _TRAIN, start, per_batch), cfg.k)

    return _train_router(cfg, router, baseline, evaluate, make_batch, "step3")


def train(cfg: TrainConfig, router: ParamSet | None = None,
          partitioner: ParamSet | None = None) -> tuple[ParamSet, list[dict]]:
    """Dispatch on ``cfg.step``."""
    if cfg.step is TrainStep.TSP_PRETRAIN:
        return step1_tsp_pretrain(cfg, router)
    if router is None:
        raise ValueError("steps 2 and 3 need router parameters")
    if cfg.step is TrainStep.PARTITIONER:
        return step2_partitioner(cfg, router, partitioner)
    if partitioner is None:
        raise ValueError("step 3 needs partitioner parameters")
    return step3_router_finetune(cfg, partitioner, router)
