"""Tour-construction MDP: tour lifecycle, masks, thresholds and reward.

A state holds one *active* tour per depot (standby or initiated) plus the
list of closed (inactive) tours.  An action picks an active tour and
either an unvisited customer or the depot sentinel :data:`DEPOT`, which
closes the tour.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Instance, Solution, Tour, max_tours

DEPOT = -1


class TourStatus(enum.Enum):
    STANDBY = "standby"
    INITIATED = "initiated"
    INACTIVE = "inactive"


class InfeasibleAction(ValueError):
    pass


class EnvDeadlock(RuntimeError):
    """No feasible action in a non-terminal state (should be unreachable)."""


@dataclass
class TourState:
    depot_index: int
    last_node: int
    remaining: int
    status: TourStatus = TourStatus.STANDBY
    visits: list[int] = field(default_factory=list)

    def used(self, capacity: int) -> int:
        return capacity - self.remaining


@dataclass(frozen=True)
class Action:
    tour_index: int
    node: int


class EnvState:
    def __init__(self, inst: Instance):
        self.inst = inst
        self.lmax = max_tours(inst)
        self.visited = np.zeros(inst.n_customers, dtype=bool)
        self.active: list[TourState] = [self._fresh(d) for d in range(inst.n_depots)]
        self.inactive: list[TourState] = []
        self.t = 0
        self.unvisited_demand = inst.total_demand
        self._masks = None

    def _fresh(self, depot: int) -> TourState:
        return TourState(depot, depot, self.inst.capacity)

    def copy(self) -> "EnvState":
        new = copy.copy(self)
        new.visited = self.visited.copy()
        new.active = [copy.copy(t) for t in self.active]
        for t in new.active:
            t.visits = list(t.visits)
        new.inactive = list(self.inactive)
        new._masks = None
        return new

    @property
    def n_initiated(self) -> int:
        return sum(t.status is TourStatus.INITIATED for t in self.active)

    def apply(self, action: Action) -> None:
        """Perform ``action`` in place."""
        if not 0 <= action.tour_index < len(self.active):
            raise InfeasibleAction(f"no active tour {action.tour_index}")
        tour = self.active[action.tour_index]
        mask = feasible_nodes(self, tour)
        slot = 0 if action.node == DEPOT else action.node + 1
        if not 0 <= slot < len(mask) or not mask[slot]:
            raise InfeasibleAction(f"node {action.node} is masked for tour {action.tour_index}")
        self.t += 1
        if action.node == DEPOT:
            tour.status = TourStatus.INACTIVE
            tour.last_node = tour.depot_index
            self.inactive.append(tour)
            if standby_allowed(self):
                self.active[action.tour_index] = self._fresh(tour.depot_index)
            else:
                del self.active[action.tour_index]
            return
        i = action.node
        self.visited[i] = True
        dem = int(self.inst.demand[i])
        self.unvisited_demand -= dem
        tour.visits.append(i)
        tour.remaining -= dem
        tour.status = TourStatus.INITIATED
        tour.last_node = self.inst.n_depots + i

    def tours(self) -> list[TourState]:
        """Closed tours followed by still-open initiated ones."""
        return list(self.inactive) + [t for t in self.active if t.status is TourStatus.INITIATED]

    def partition(self) -> list[Tour]:
        return [Tour(t.depot_index, tuple(t.visits)) for t in self.tours()]


def init_state(inst: Instance) -> EnvState:
    return EnvState(inst)


def wastable_and_threshold(st: EnvState) -> tuple[int, float]:
    """Total wastable capacity and the per-remaining-tour threshold.

    Once every tour slot is closed the threshold is undefined and 0 is
    returned; standby masking already stops new tours in that case.
    """
    C = st.inst.capacity
    wasted = sum(t.remaining for t in st.inactive)
    eta = st.lmax * C - st.inst.total_demand - wasted
    slots = st.lmax - len(st.inactive)
    if slots <= 0:
        return eta, 0.0
    return eta, eta / slots


def standby_allowed(st: EnvState) -> bool:
    return st.n_initiated + len(st.inactive) < st.lmax


def _fits_any(st: EnvState, capacity_left: int) -> bool:
    return bool(np.any(~st.visited & (st.inst.demand <= capacity_left)))


def deactivation_allowed(st: EnvState, tour: TourState) -> bool:
    """May ``tour`` pick its depot now?

    Requires an initiated tour whose used capacity exceeds the threshold.
    In addition the capacity it would waste must fit the per-tour budget
    (remaining <= threshold) unless no unvisited customer fits anyway;
    without that budget check the decoder can run out of tours.
    """
    if tour.status is not TourStatus.INITIATED:
        return False
    _, thr = wastable_and_threshold(st)
    if tour.used(st.inst.capacity) <= thr:
        return False
    return tour.remaining <= thr or not _fits_any(st, tour.remaining)


def _base_mask(st: EnvState, tour: TourState) -> np.ndarray:
    mask = np.zeros(st.inst.n_customers + 1, dtype=bool)
    if tour.status is TourStatus.INACTIVE:
        return mask
    if tour.status is TourStatus.STANDBY and not standby_allowed(st):
        return mask
    mask[1:] = ~st.visited & (st.inst.demand <= tour.remaining)
    mask[0] = deactivation_allowed(st, tour)
    return mask


def action_masks(st: EnvState) -> list[np.ndarray]:
    """Masks for every active tour (cached per step).

    If no action is feasible in a non-terminal state, the depot is opened
    for the fullest initiated tour as a last resort.  Under the usual
    capacity settings (C >= 2 * max demand) this never triggers.
    """
    cached = st._masks
    if cached is not None and cached[0] == st.t:
        return cached[1]
    masks = [_base_mask(st, t) for t in st.active]
    if not any(m.any() for m in masks) and not is_terminal(st):
        initiated = [i for i, t in enumerate(st.active) if t.status is TourStatus.INITIATED]
        if initiated:
            fullest = min(initiated, key=lambda i: (st.active[i].remaining, i))
            masks[fullest][0] = True
    st._masks = (st.t, masks)
    return masks


def feasible_nodes(st: EnvState, tour: TourState) -> np.ndarray:
    """Boolean mask of length n+1: slot 0 is the depot, slot 1+i customer i."""
    for i, t in enumerate(st.active):
        if t is tour:
            return action_masks(st)[i]
    return np.zeros(st.inst.n_customers + 1, dtype=bool)


def step(st: EnvState, action: Action) -> EnvState:
    new = st.copy()
    new.apply(action)
    return new


def is_terminal(st: EnvState) -> bool:
    return bool(st.visited.all())


def check_progress(st: EnvState, masks: Sequence[np.ndarray]) -> None:
    if not any(m.any() for m in masks):
        _, thr = wastable_and_threshold(st)
        detail = ", ".join(
            f"depot {t.depot_index} {t.status.value} remaining={t.remaining}" for t in st.active)
        raise EnvDeadlock(
            f"no feasible action at t={st.t}: {int((~st.visited).sum())} customers unvisited, "
            f"{len(st.inactive)}/{st.lmax} tours closed, threshold={thr:.3f}; active: [{detail}]")


def to_solution(st: EnvState) -> Solution:
    return Solution(tuple(st.partition()))


def random_rollout(inst: Instance, rng: np.random.Generator) -> EnvState:
    """Drive the environment to termination with uniformly random feasible actions."""
    st = init_state(inst)
    while not is_terminal(st):
        masks = action_masks(st)
        check_progress(st, masks)
        choices = [(ti, j) for ti, m in enumerate(masks) for j in np.flatnonzero(m)]
        ti, j = choices[rng.integers(len(choices))]
        st.apply(Action(ti, DEPOT if j == 0 else int(j) - 1))
    return st


def tour_points(inst: Instance, tour: Tour) -> np.ndarray:
    """Depot followed by the tour's customers, as an (m+1, 2) array."""
    idx = [tour.depot_index] + [inst.n_depots + v for v in tour.visits]
    return inst.nodes[idx]


def reward(inst: Instance, partition: Sequence[Tour],
           tsp: Callable[[np.ndarray], tuple[Sequence[int], float]]) -> float:
    """Negative total cycle length, each tour routed by ``tsp`` (depot at index 0)."""
    total = 0.0
    for tour in partition:
        if tour.visits:
            _, length = tsp(tour_points(inst, tour))
            total += length
    return -total
