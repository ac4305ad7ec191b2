"""Per-tour routing: exact Held-Karp, nearest neighbour + 2-opt/Or-opt, neural policy.

Every router takes an ``(m, 2)`` array of points whose row 0 is the depot
and returns ``(order, length)`` where ``order`` starts with 0 and is a
permutation of ``range(m)``.
"""
from __future__ import annotations

import enum
from typing import Sequence

import numpy as np

from .core import Instance, Solution, Tour, cycle_length
from .env import tour_points

HELD_KARP_MAX = 13
_EPS = 1e-10


class RouterKind(str, enum.Enum):
    EXACT_DP = "dp"
    NN_2OPT = "2opt"
    NEURAL = "neural"


def distance_matrix(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    diff = p[:, None, :] - p[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def held_karp(points: np.ndarray) -> tuple[list[int], float]:
    """Exact shortest cycle through all points, O(2^m m^2)."""
    m = len(points)
    if m < 1:
        raise ValueError("held_karp needs at least one point")
    if m > HELD_KARP_MAX:
        raise ValueError(f"held_karp limited to {HELD_KARP_MAX} points, got {m}")
    if m == 1:
        return [0], 0.0
    D = distance_matrix(points)
    k = m - 1
    Dk = D[1:, 1:]
    full = (1 << k) - 1
    dp = np.full((1 << k, k), np.inf)
    parent = np.full((1 << k, k), -1, dtype=np.int64)
    for j in range(k):
        dp[1 << j, j] = D[0, j + 1]
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        row = dp[mask]
        for j in range(k):
            bit = 1 << j
            if not mask & bit:
                continue
            cand = dp[mask ^ bit] + Dk[:, j]
            i = int(np.argmin(cand))
            row[j] = cand[i]
            parent[mask, j] = i
    closing = dp[full] + D[1:, 0]
    last = int(np.argmin(closing))
    order = []
    mask = full
    while last >= 0:
        order.append(last + 1)
        mask, last = mask ^ (1 << last), int(parent[mask, last])
    order.append(0)
    order.reverse()
    # recompute along the recovered order so the value matches cycle_length exactly
    return order, cycle_length(points, order)


# -- local search -------------------------------------------------------------------

def _two_opt(order: list[int], D: list[list[float]]) -> bool:
    """First-improvement 2-opt with a fixed scan order; position 0 never moves."""
    n = len(order)
    changed = False
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 2, n):
                a, b = order[i], order[i + 1]
                c, e = order[j], order[(j + 1) % n]
                if e == a:
                    continue
                delta = D[a][c] + D[b][e] - D[a][b] - D[c][e]
                if delta < -_EPS:
                    order[i + 1:j + 1] = order[i + 1:j + 1][::-1]
                    improved = changed = True
    return changed


def _or_opt(order: list[int], D: list[list[float]]) -> bool:
    """Relocate one segment of 1-3 nodes (either orientation); first improvement."""
    n = len(order)
    for seg_len in (1, 2, 3):
        if n - 1 < seg_len + 1:
            break
        for i in range(1, n - seg_len + 1):
            seg = order[i:i + seg_len]
            prev, nxt = order[i - 1], order[(i + seg_len) % n]
            s0, s1 = seg[0], seg[-1]
            gain = D[prev][s0] + D[s1][nxt] - D[prev][nxt]
            rest = order[:i] + order[i + seg_len:]
            m = len(rest)
            for p in range(m):
                u, v = rest[p], rest[(p + 1) % m]
                if u == prev and v == nxt:
                    continue
                fwd = D[u][s0] + D[s1][v] - D[u][v]
                rev = D[u][s1] + D[s0][v] - D[u][v]
                if fwd - gain < -_EPS or rev - gain < -_EPS:
                    piece = seg if fwd <= rev else seg[::-1]
                    order[:] = rest[:p + 1] + piece + rest[p + 1:]
                    return True
    return False


def improve(order: Sequence[int], points: np.ndarray) -> tuple[list[int], float]:
    """Alternate 2-opt and Or-opt from ``order`` until neither improves."""
    order = list(order)
    if len(order) > 3:
        D = distance_matrix(points).tolist()
        while True:
            _two_opt(order, D)
            if not _or_opt(order, D):
                break
    return order, cycle_length(points, order)


def nearest_neighbor(points: np.ndarray, seed: int = 0) -> list[int]:
    """Greedy nearest-neighbour cycle from point 0; exact distance ties broken by ``seed``."""
    m = len(points)
    D = distance_matrix(points)
    rng = np.random.default_rng(seed)
    order = [0]
    left = np.ones(m, dtype=bool)
    left[0] = False
    while left.any():
        d = np.where(left, D[order[-1]], np.inf)
        best = np.flatnonzero(d == d.min())
        order.append(int(best[0] if len(best) == 1 else rng.choice(best)))
        left[order[-1]] = False
    return order


def nn_2opt(points: np.ndarray, seed: int = 0) -> tuple[list[int], float]:
    if len(points) < 1:
        raise ValueError("need at least one point")
    return improve(nearest_neighbor(points, seed), points)


# -- routing a partition ---------------------------------------------------------------

def _reorder(tour: Tour, order: Sequence[int]) -> Tour:
    return Tour(tour.depot_index, tuple(tour.visits[o - 1] for o in order[1:]))


def route_tour(inst: Instance, tour: Tour, kind: RouterKind = RouterKind.NN_2OPT,
               seed: int = 0) -> Tour:
    kind = RouterKind(kind)
    if len(tour.visits) <= 2:
        return tour
    pts = tour_points(inst, tour)
    if kind is RouterKind.EXACT_DP:
        order, _ = held_karp(pts)
    elif kind is RouterKind.NN_2OPT:
        order, length = nn_2opt(pts, seed)
        alt, alt_len = improve(range(len(pts)), pts)
        if alt_len < length:
            order = alt
    else:
        raise ValueError("neural routing needs parameters; use route_solution")
    return _reorder(tour, order)


def route_solution(inst: Instance, partition: Sequence[Tour] | Solution,
                   kind: RouterKind = RouterKind.NN_2OPT, params=None, seed: int = 0) -> Solution:
    """Order the customers of every tour with the chosen router."""
    tours = list(partition.tours if isinstance(partition, Solution) else partition)
    kind = RouterKind(kind)
    if kind is RouterKind.NEURAL:
        if params is None:
            raise ValueError("NEURAL routing requires router parameters")
        from .tsp_policy import route_tours_neural
        return Solution(tuple(route_tours_neural(inst, tours, params)))
    return Solution(tuple(route_tour(inst, t, kind, seed) if t.visits else t for t in tours))
