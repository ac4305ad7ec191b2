"""Non-learned references: exhaustive oracle, cluster + savings, random partition."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Instance, Solution, Tour, max_tours, solution_cost
from .env import random_rollout, to_solution
from .instancegen import rng_for
from .router import RouterKind, held_karp, route_solution

ORACLE_MAX_CUSTOMERS = 8
ORACLE_MAX_DEPOTS = 3


def _members(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def brute_force(inst: Instance) -> Solution:
    """Exact optimum by dynamic programming over customer subsets.

    Every capacity-feasible subset is costed as its best depot plus an
    exact cycle; subsets are then combined into at most ``max_tours``
    blocks.  Equivalent to enumerating all set partitions.
    """
    n, d = inst.n_customers, inst.n_depots
    if n > ORACLE_MAX_CUSTOMERS or d > ORACLE_MAX_DEPOTS:
        raise ValueError(f"brute_force limited to {ORACLE_MAX_CUSTOMERS} customers and "
                         f"{ORACLE_MAX_DEPOTS} depots")
    full = (1 << n) - 1
    load = np.zeros(full + 1, dtype=np.int64)
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        load[mask] = load[mask & (mask - 1)] + inst.demand[low]
    block = {}
    for mask in range(1, full + 1):
        if load[mask] > inst.capacity:
            continue
        members = _members(mask, n)
        best = None
        for dep in range(d):
            pts = inst.nodes[[dep] + [d + i for i in members]]
            order, length = held_karp(pts)
            if best is None or length < best[0] - 1e-12:
                best = (length, Tour(dep, tuple(members[o - 1] for o in order[1:])))
        block[mask] = best
    limit = max_tours(inst)
    # f[t][mask]: cheapest cover of mask with exactly t tours
    INF = float("inf")
    f = [dict() for _ in range(limit + 1)]
    f[0][0] = (0.0, None)
    for t in range(1, limit + 1):
        prev = f[t - 1]
        cur = f[t]
        for mask in range(1, full + 1):
            low = mask & -mask
            best = (INF, None)
            sub = mask
            while sub:
                if sub & low and sub in block:
                    rest = mask ^ sub
                    if rest in prev:
                        c = prev[rest][0] + block[sub][0]
                        if c < best[0] - 1e-12:
                            best = (c, sub)
                sub = (sub - 1) & mask
            if best[1] is not None:
                cur[mask] = best
    t_best = min((t for t in range(1, limit + 1) if full in f[t]), key=lambda t: f[t][full][0])
    tours = []
    mask, t = full, t_best
    while mask:
        sub = f[t][mask][1]
        tours.append(block[sub][1])
        mask ^= sub
        t -= 1
    return Solution(tuple(tours))


def nearest_depot_clusters(inst: Instance) -> list[list[int]]:
    d = inst.n_depots
    owner = np.argmin(inst.dist[d:, :d], axis=1)
    return [np.flatnonzero(owner == k).tolist() for k in range(d)]


def _savings_routes(inst: Instance, depot: int, customers: Sequence[int]) -> list[list[int]]:
    """Parallel Clarke-Wright savings inside one cluster."""
    d, C = inst.n_depots, inst.capacity
    D = inst.dist
    routes = {i: [i] for i in customers}
    where = {i: i for i in customers}
    loads = {i: int(inst.demand[i]) for i in customers}
    pairs = []
    for a, i in enumerate(customers):
        for j in customers[a + 1:]:
            s = D[depot, d + i] + D[depot, d + j] - D[d + i, d + j]
            pairs.append((-s, i, j))
    pairs.sort()
    for neg_s, i, j in pairs:
        if -neg_s <= 0:
            break
        ri, rj = where[i], where[j]
        if ri == rj or loads[ri] + loads[rj] > C:
            continue
        a, b = routes[ri], routes[rj]
        if a[-1] == i and b[0] == j:
            merged = a + b
        elif a[0] == i and b[-1] == j:
            merged = b + a
        elif a[-1] == i and b[-1] == j:
            merged = a + b[::-1]
        elif a[0] == i and b[0] == j:
            merged = a[::-1] + b
        else:
            continue
        routes[ri] = merged
        loads[ri] += loads.pop(rj)
        del routes[rj]
        for c in b:
            where[c] = ri
    return [routes[k] for k in sorted(routes)]


def _enforce_tour_limit(inst: Instance, tours: list[Tour]) -> list[Tour] | None:
    """Merge the cheapest compatible pair of tours until the l_max bound holds."""
    limit = max_tours(inst)
    tours = list(tours)
    d = inst.n_depots
    while len(tours) > limit:
        loads = [int(inst.demand[list(t.visits)].sum()) for t in tours]
        best = None
        for a in range(len(tours)):
            for b in range(a + 1, len(tours)):
                if loads[a] + loads[b] > inst.capacity:
                    continue
                ta, tb = tours[a], tours[b]
                # join at ta's depot: depot -> ta ... -> tb ... -> depot
                extra = (inst.dist[d + ta.visits[-1], d + tb.visits[0]]
                         - inst.dist[d + ta.visits[-1], ta.depot_index]
                         - inst.dist[tb.depot_index, d + tb.visits[0]]
                         + inst.dist[ta.depot_index, d + tb.visits[-1]]
                         - inst.dist[d + tb.visits[-1], tb.depot_index])
                if best is None or extra < best[0] - 1e-12:
                    best = (extra, a, b)
        if best is None:
            return None
        _, a, b = best
        merged = Tour(tours[a].depot_index, tours[a].visits + tours[b].visits)
        tours = [t for i, t in enumerate(tours) if i not in (a, b)] + [merged]
    return tours


def cluster_savings(inst: Instance, kind: RouterKind = RouterKind.NN_2OPT) -> Solution:
    """Nearest-depot clustering, savings per cluster, then per-tour routing."""
    tours = []
    for depot, members in enumerate(nearest_depot_clusters(inst)):
        tours += [Tour(depot, tuple(r)) for r in _savings_routes(inst, depot, members)]
    limited = _enforce_tour_limit(inst, tours)
    if limited is None:
        # unreachable in practice; a budget-respecting construction is used instead
        limited = to_solution(random_rollout(inst, rng_for(0, 0))).nonempty()
    return route_solution(inst, limited, kind)


def random_partition(inst: Instance, seed: int = 0,
                     kind: RouterKind = RouterKind.NN_2OPT) -> Solution:
    """Shuffled customers, first-fit into l_max tour slots whose depots alternate."""
    rng = rng_for(seed, 0)
    d, C = inst.n_depots, inst.capacity
    slots = max_tours(inst)
    loads = [0] * slots
    visits: list[list[int]] = [[] for _ in range(slots)]
    for i in rng.permutation(inst.n_customers):
        dem = int(inst.demand[i])
        for s in range(slots):
            if loads[s] + dem <= C:
                loads[s] += dem
                visits[s].append(int(i))
                break
        else:
            part = to_solution(random_rollout(inst, rng)).nonempty()
            return route_solution(inst, part, kind)
    part = [Tour(s % d, tuple(v)) for s, v in enumerate(visits) if v]
    return route_solution(inst, part, kind)


def routed_cost(inst: Instance, sol: Solution) -> float:
    return solution_cost(inst, sol)
