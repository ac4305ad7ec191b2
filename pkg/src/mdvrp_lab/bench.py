"""Benchmark harness and k-sensitivity sweep, both emitting CSV.

Bench CSV columns: ``instance_id, method, objective, runtime_ms,
gap_percent, status``.  Gap is ``100 * (obj - ref) / ref`` where ``ref``
is the reference method's objective on that instance (default: the best
successful method).  After the data rows comes one ``SUMMARY`` row per
method: mean objective, total runtime, mean gap, and ``ok=<n>/<total>``.
"""
from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import Instance, Solution, solution_cost, validate
from .partitioner import DecodeConfig, resolve_k, rollout
from .router import RouterKind, route_solution

Solver = Callable[[Instance], Solution]
BENCH_FIELDS = ("instance_id", "method", "objective", "runtime_ms", "gap_percent", "status")
SENS_FIELDS = ("instance_id", "k_percent", "k", "cost", "ratio")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("MDVRP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class BenchRow:
    instance_id: str
    method: str
    objective: float
    runtime_ms: float
    gap_percent: float
    status: str


def _run_one(inst: Instance, methods: Mapping[str, Solver]) -> list[BenchRow]:
    rows = []
    for name, solve in methods.items():
        t0 = time.perf_counter()
        try:
            sol = solve(inst)
            report = validate(inst, sol)
            if not report.is_feasible:
                raise ValueError("infeasible: " + "; ".join(m for _, m in report.violations))
            obj, status = solution_cost(inst, sol), "ok"
        except Exception as exc:  # a failing solver is recorded, the run continues
            obj, status = float("nan"), f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        rows.append(BenchRow(inst.id, name, obj, 1000.0 * (time.perf_counter() - t0), float("nan"),
                             status))
    return rows


def bench(instances: Sequence[Instance], methods: Mapping[str, Solver],
          reference: str | None = None, threads: int | None = None) -> list[BenchRow]:
    """Solve every instance with every method; per-instance gaps against the reference."""
    if not methods:
        raise ValueError("no methods given")
    if reference is not None and reference not in methods:
        raise ValueError(f"reference method {reference!r} not in the run")
    threads = worker_count() if threads is None else max(1, threads)
    if threads == 1:
        per_inst = [_run_one(inst, methods) for inst in instances]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_inst = list(pool.map(lambda i: _run_one(i, methods), instances))
    out = []
    for rows in per_inst:
        ok = [r for r in rows if r.status == "ok"]
        if reference is None:
            ref = min((r.objective for r in ok), default=float("nan"))
        else:
            ref = next((r.objective for r in ok if r.method == reference), float("nan"))
        for r in rows:
            if r.status == "ok" and np.isfinite(ref) and ref > 0:
                r.gap_percent = 100.0 * (r.objective - ref) / ref
            elif r.status == "ok" and ref == 0:
                r.gap_percent = 0.0
        out += rows
    return out


def summarize(rows: Sequence[BenchRow]) -> list[BenchRow]:
    out = []
    for method in dict.fromkeys(r.method for r in rows):
        mine = [r for r in rows if r.method == method]
        ok = [r for r in mine if r.status == "ok"]
        obj = float(np.mean([r.objective for r in ok])) if ok else float("nan")
        gaps = [r.gap_percent for r in ok if np.isfinite(r.gap_percent)]
        out.append(BenchRow("SUMMARY", method, obj, float(sum(r.runtime_ms for r in mine)),
                            float(np.mean(gaps)) if gaps else float("nan"),
                            f"ok={len(ok)}/{len(mine)}"))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if np.isnan(v) else repr(v)
    return str(v)


def bench_csv(rows: Sequence[BenchRow], with_summary: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_FIELDS)
    for r in list(rows) + (summarize(rows) if with_summary else []):
        w.writerow([_fmt(getattr(r, f)) for f in BENCH_FIELDS])
    return buf.getvalue()


# -- sensitivity ------------------------------------------------------------------------------

@dataclass
class SensitivityRow:
    instance_id: str
    k_percent: float
    k: int
    cost: float
    ratio: float


def sensitivity(instances: Sequence[Instance], k_percents: Sequence[float], params,
                router: RouterKind = RouterKind.NN_2OPT, router_params=None) -> list[SensitivityRow]:
    """Greedy cost for every k; ratio to the per-instance minimum over all k.

    Ends with one ``ALL`` row per k whose ratio is the mean cost divided by
    the mean of the per-instance minima.
    """
    if not k_percents:
        raise ValueError("k_percents must be nonempty")
    costs = np.empty((len(instances), len(k_percents)))
    ks = np.empty_like(costs, dtype=np.int64)
    for a, inst in enumerate(instances):
        for b, pct in enumerate(k_percents):
            k = resolve_k(pct, inst.n_customers)
            part, _ = rollout(inst, params, DecodeConfig(k=k))
            costs[a, b] = solution_cost(inst, route_solution(inst, part, router, router_params))
            ks[a, b] = k
    best = costs.min(axis=1, keepdims=True)
    ratios = costs / best
    rows = [SensitivityRow(inst.id, float(pct), int(ks[a, b]), float(costs[a, b]), float(ratios[a, b]))
            for a, inst in enumerate(instances) for b, pct in enumerate(k_percents)]
    mean_best = float(best.mean())
    for b, pct in enumerate(k_percents):
        rows.append(SensitivityRow("ALL", float(pct), -1, float(costs[:, b].mean()),
                                   float(costs[:, b].mean() / mean_best)))
    return rows


def sensitivity_csv(rows: Sequence[SensitivityRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SENS_FIELDS)
    for r in rows:
        w.writerow([_fmt(getattr(r, f)) for f in SENS_FIELDS])
    return buf.getvalue()
