"""Reproducible random MDVRP instances."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import Instance


class Distribution(str, enum.Enum):
    UNIFORM = "uniform"
    BETA = "beta"
    GAMMA = "gamma"


class DepotLayout(str, enum.Enum):
    RANDOM = "random"
    FIXED_TOP_EDGE = "fixed_top_edge"


# Beta read as shape parameters (alpha, beta); gamma as (shape, scale).
BETA_SHAPE = (3.0, 1.0)
GAMMA_SHAPE_SCALE = (7.0, 1.0)
DEMAND_RANGE = (1, 10)

_FIXED_DEPOTS = {
    2: [(0.0, 1.0), (1.0, 1.0)],
    3: [(0.0, 1.0), (0.5, 1.0), (1.0, 1.0)],
    4: [(0.0, 1.0), (0.33, 1.0), (0.66, 1.0), (1.0, 1.0)],
}


@dataclass(frozen=True)
class GenConfig:
    n_customers: int
    n_depots: int
    capacity: int = 0
    distribution: Distribution = Distribution.UNIFORM
    depot_layout: DepotLayout = DepotLayout.RANDOM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        object.__setattr__(self, "depot_layout", DepotLayout(self.depot_layout))
        if self.n_customers < 1:
            raise ValueError("n_customers must be >= 1")
        if not 1 <= self.n_depots <= 9:
            raise ValueError("n_depots must lie in [1, 9]")
        if self.depot_layout is DepotLayout.FIXED_TOP_EDGE and self.n_depots not in _FIXED_DEPOTS:
            raise ValueError("FIXED_TOP_EDGE supports 2, 3 or 4 depots")
        if self.capacity < 0:
            raise ValueError("capacity must be >= 0 (0 selects the size table)")

    @property
    def resolved_capacity(self) -> int:
        return self.capacity or default_capacity(self.n_customers)


def default_capacity(n_customers: int) -> int:
    if n_customers < 1:
        raise ValueError("n_customers must be >= 1")
    if n_customers <= 100:
        return 50
    if n_customers <= 400:
        return 150
    if n_customers <= 700:
        return 175
    return 200


def fixed_depots(n_depots: int) -> list[tuple[float, float]]:
    try:
        return list(_FIXED_DEPOTS[n_depots])
    except KeyError:
        raise ValueError(f"no fixed layout for {n_depots} depots") from None


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    """Independent PCG64 stream keyed by (master seed, instance index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    out = (x - lo) / span
    # a degenerate axis (single customer) is placed mid-square
    out[:, hi <= lo] = 0.5
    return np.clip(out, 0.0, 1.0)


def sample_coordinates(rng: np.random.Generator, n: int, distribution: Distribution) -> np.ndarray:
    distribution = Distribution(distribution)
    if distribution is Distribution.UNIFORM:
        return rng.random((n, 2))
    if distribution is Distribution.BETA:
        raw = rng.beta(*BETA_SHAPE, size=(n, 2))
    else:
        shape, scale = GAMMA_SHAPE_SCALE
        raw = rng.gamma(shape, scale, size=(n, 2))
    return _minmax(raw)


def generate(cfg: GenConfig, index: int = 0) -> Instance:
    rng = rng_for(cfg.seed, index)
    if cfg.depot_layout is DepotLayout.FIXED_TOP_EDGE:
        depots = np.array(fixed_depots(cfg.n_depots), dtype=np.float64)
    else:
        depots = rng.random((cfg.n_depots, 2))
    customers = sample_coordinates(rng, cfg.n_customers, cfg.distribution)
    lo, hi = DEMAND_RANGE
    demand = rng.integers(lo, hi + 1, size=cfg.n_customers)
    iid = (f"{cfg.distribution.value}-n{cfg.n_customers}-d{cfg.n_depots}"
           f"-s{cfg.seed}-i{index}")
    return Instance(depots, customers, demand, cfg.resolved_capacity, iid)


def generate_many(cfg: GenConfig, count: int, start: int = 0) -> list[Instance]:
    return [generate(cfg, i) for i in range(start, start + count)]


def random_tsp(rng: np.random.Generator, batch: int, n_nodes: int) -> np.ndarray:
    """Uniform TSP point sets, shape ``(batch, n_nodes, 2)``."""
    return rng.random((batch, n_nodes, 2))
