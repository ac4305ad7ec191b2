"""Instance and solution model for the multi-depot capacitated VRP.

Node numbering used throughout the package: depots come first
(``0 .. d-1``), customers follow (``d .. d+n-1``).  :class:`Tour` itself
refers to customers by their *customer* index ``0 .. n-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

COVERAGE = "COVERAGE"
CAPACITY = "CAPACITY"
DEPOT_ANCHOR = "DEPOT_ANCHOR"
DUPLICATE = "DUPLICATE"


class InstanceError(ValueError):
    """Raised when an instance violates its construction invariants."""


def _frozen_array(values, dtype, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != ndim:
        if ndim == 2 and arr.size == 0:
            arr = arr.reshape(0, 2)
        else:
            raise InstanceError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    depots: np.ndarray
    customers: np.ndarray
    demand: np.ndarray
    capacity: int
    id: str = ""

    def __post_init__(self):
        depots = _frozen_array(self.depots, np.float64, 2, "depots")
        customers = _frozen_array(self.customers, np.float64, 2, "customers")
        raw_demand = np.asarray(self.demand)
        if raw_demand.size and not np.all(np.equal(np.mod(raw_demand, 1), 0)):
            raise InstanceError("demands must be integers")
        demand = _frozen_array(raw_demand, np.int64, 1, "demand")
        if int(self.capacity) != self.capacity:
            raise InstanceError("capacity must be an integer")
        capacity = int(self.capacity)
        object.__setattr__(self, "depots", depots)
        object.__setattr__(self, "customers", customers)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "capacity", capacity)

        if len(depots) < 1:
            raise InstanceError("at least one depot is required")
        if len(customers) < 1:
            raise InstanceError("at least one customer is required")
        if depots.shape[1] != 2 or customers.shape[1] != 2:
            raise InstanceError("coordinates must be 2-D points")
        if len(demand) != len(customers):
            raise InstanceError(
                f"{len(demand)} demands given for {len(customers)} customers")
        if not (np.all(np.isfinite(depots)) and np.all(np.isfinite(customers))):
            raise InstanceError("coordinates must be finite")
        if capacity < 1:
            raise InstanceError(f"capacity must be positive, got {capacity}")
        bad = np.flatnonzero((demand < 1) | (demand > capacity))
        if bad.size:
            i = int(bad[0])
            raise InstanceError(
                f"customer {i} has demand {int(demand[i])} outside [1, {capacity}]")

    @property
    def n_depots(self) -> int:
        return len(self.depots)

    @property
    def n_customers(self) -> int:
        return len(self.customers)

    @property
    def n_nodes(self) -> int:
        return self.n_depots + self.n_customers

    @cached_property
    def nodes(self) -> np.ndarray:
        """Coordinates of all nodes, depots first."""
        arr = np.vstack([self.depots, self.customers])
        arr.setflags(write=False)
        return arr

    @cached_property
    def dist(self) -> np.ndarray:
        """Dense Euclidean distance matrix over :attr:`nodes`."""
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        d = np.sqrt((diff ** 2).sum(-1))
        d.setflags(write=False)
        return d

    @property
    def total_demand(self) -> int:
        return int(self.demand.sum())

    def customer_node(self, i: int) -> int:
        return self.n_depots + i

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.id == other.id and self.capacity == other.capacity
                and np.array_equal(self.depots, other.depots)
                and np.array_equal(self.customers, other.customers)
                and np.array_equal(self.demand, other.demand))

    __hash__ = object.__hash__


@dataclass(frozen=True)
class Tour:
    depot_index: int
    visits: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "depot_index", int(self.depot_index))
        object.__setattr__(self, "visits", tuple(int(v) for v in self.visits))

    def __len__(self):
        return len(self.visits)


@dataclass(frozen=True)
class Solution:
    tours: tuple[Tour, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tours", tuple(self.tours))

    def nonempty(self) -> list[Tour]:
        return [t for t in self.tours if t.visits]

    @property
    def n_opened(self) -> int:
        return len(self.nonempty())


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    @property
    def is_feasible(self) -> bool:
        return not self.violations

    def tags(self) -> set[str]:
        return {tag for tag, _ in self.violations}


def euclid(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def cycle_length(points: np.ndarray, order: Iterable[int]) -> float:
    """Length of the closed cycle visiting ``points[order]`` in sequence."""
    order = list(order)
    if len(order) < 2:
        return 0.0
    p = np.asarray(points, dtype=np.float64)[order]
    return float(np.sqrt(((p - np.roll(p, -1, axis=0)) ** 2).sum(-1)).sum())


def tour_length(inst: Instance, tour: Tour) -> float:
    if not 0 <= tour.depot_index < inst.n_depots:
        raise IndexError(f"depot index {tour.depot_index} out of range")
    if not tour.visits:
        return 0.0
    for v in tour.visits:
        if not 0 <= v < inst.n_customers:
            raise IndexError(f"customer index {v} out of range")
    d = inst.dist
    nodes = [tour.depot_index] + [inst.n_depots + v for v in tour.visits]
    total = 0.0
    for a, b in zip(nodes, nodes[1:] + nodes[:1]):
        total += d[a, b]
    return float(total)


def solution_cost(inst: Instance, sol: Solution) -> float:
    return float(sum(tour_length(inst, t) for t in sol.tours))


def validate(inst: Instance, sol: Solution) -> FeasibilityReport:
    """Check coverage, capacity, depot anchoring and duplicate visits.

    Subtours cannot occur because every tour is an ordered list anchored
    at its depot, so only these four constraint families can fail.
    """
    violations: list[tuple[str, str]] = []
    seen: dict[int, int] = {}
    for ti, tour in enumerate(sol.tours):
        if not tour.visits:
            continue
        if not 0 <= tour.depot_index < inst.n_depots:
            violations.append(
                (DEPOT_ANCHOR, f"tour {ti} uses unknown depot {tour.depot_index}"))
        load = 0
        for v in tour.visits:
            if not 0 <= v < inst.n_customers:
                violations.append((COVERAGE, f"tour {ti} visits unknown customer {v}"))
                continue
            if v in seen:
                violations.append(
                    (DUPLICATE, f"customer {v} visited in tour {seen[v]} and tour {ti}"))
            else:
                seen[v] = ti
            load += int(inst.demand[v])
        if load > inst.capacity:
            violations.append(
                (CAPACITY, f"tour {ti} load {load} exceeds capacity {inst.capacity}"))
    for v in range(inst.n_customers):
        if v not in seen:
            violations.append((COVERAGE, f"customer {v} is not visited"))
    return FeasibilityReport(tuple(violations))


def max_tours(inst: Instance) -> int:
    """Upper bound on the number of tours: ceil(total demand / C) + |depots|."""
    return -(-inst.total_demand // inst.capacity) + inst.n_depots
