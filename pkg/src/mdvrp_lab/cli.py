"""Command-line entry point ``mdvrp``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .baselines import brute_force, cluster_savings, random_partition
from .bench import bench, bench_csv, sensitivity, sensitivity_csv
from .core import Instance, solution_cost, validate
from .formats import FormatError, load_instance, read_solution, write_instance, write_solution
from .instancegen import DepotLayout, Distribution, GenConfig, generate
from .milp import build_model, export_lp
from .nn import load, save
from .partitioner import DecodeConfig, DecodeMode, parallel_k, resolve_k, rollout
from .router import RouterKind, route_solution
from .training import TrainConfig, train

METHODS = ("oracle", "cluster", "random", "deepmdv")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _instances(paths: Sequence[str]) -> list[Instance]:
    files = []
    for p in paths:
        p = Path(p)
        files += sorted(f for f in p.iterdir() if f.is_file()) if p.is_dir() else [p]
    return [load_instance(f) for f in files]


def _k_values(args, inst: Instance) -> list[int]:
    if args.k:
        return list(args.k)
    return [resolve_k(p, inst.n_customers) for p in (args.k_percent or [50.0])]


def make_solver(args):
    """Solver closure for ``--method`` with the routing/decoding flags applied."""
    router = RouterKind(args.router)
    router_params = load(args.router_checkpoint) if args.router_checkpoint else None
    if router is RouterKind.NEURAL and router_params is None:
        raise SystemExit("--router neural needs --router-checkpoint")
    method = args.method
    if method == "oracle":
        return lambda inst: brute_force(inst)
    if method == "cluster":
        return lambda inst: cluster_savings(inst, router) if router is not RouterKind.NEURAL else \
            route_solution(inst, cluster_savings(inst), router, router_params)
    if method == "random":
        return lambda inst: random_partition(inst, args.seed, router) if router is not RouterKind.NEURAL \
            else route_solution(inst, random_partition(inst, args.seed), router, router_params)
    if not args.checkpoint:
        raise SystemExit("--method deepmdv needs --checkpoint (trained partitioner)")
    params = load(args.checkpoint)

    def solve(inst):
        ks = _k_values(args, inst)
        if args.mode == "greedy" and len(ks) > 1:
            return parallel_k(inst, params, ks, router, router_params)
        cfg = DecodeConfig(mode=DecodeMode(args.mode), samples=args.samples, k=ks[0], seed=args.seed)
        part, _ = rollout(inst, params, cfg)
        return route_solution(inst, part, router, router_params)
    return solve


def _add_solver_flags(p):
    p.add_argument("--method", choices=METHODS, default="deepmdv")
    p.add_argument("--router", choices=[r.value for r in RouterKind], default="2opt")
    p.add_argument("--mode", choices=[m.value for m in DecodeMode], default="greedy")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--k-percent", type=float, nargs="+")
    p.add_argument("--checkpoint")
    p.add_argument("--router-checkpoint")
    p.add_argument("--seed", type=int, default=0)


def cmd_gen(args) -> int:
    cfg = GenConfig(n_customers=args.n, n_depots=args.d, capacity=args.capacity,
                    distribution=Distribution(args.dist), depot_layout=DepotLayout(args.layout),
                    seed=args.seed)
    if args.count == 1:
        _emit(write_instance(generate(cfg, args.index)), args.out)
        return 0
    if not args.out:
        raise SystemExit("--count > 1 needs --out DIR")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.index, args.index + args.count):
        inst = generate(cfg, i)
        (out / f"{inst.id}.txt").write_text(write_instance(inst))
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    sol = make_solver(args)(inst)
    _emit(write_solution(inst, sol), args.out)
    return 0


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    _emit(write_solution(inst, brute_force(inst)), args.out)
    return 0


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    try:
        sol = read_solution(Path(args.solution).read_text(), inst)
    except FormatError as exc:
        print(f"INVALID: {exc}")
        return 1
    report = validate(inst, sol)
    print(f"feasible tours={sol.n_opened} cost={solution_cost(inst, sol)!r}")
    return 0 if report.is_feasible else 1


def cmd_train(args) -> int:
    fields = json.loads(Path(args.config).read_text()) if args.config else {}
    fields["step"] = int(args.step)
    if args.seed is not None:
        fields["seed"] = args.seed
    if args.log:
        fields["log_path"] = args.log
    cfg = TrainConfig(**fields)
    router = load(args.router_checkpoint) if args.router_checkpoint else None
    partitioner = load(args.checkpoint) if args.checkpoint else None
    params, _ = train(cfg, router, partitioner)
    save(params, args.out)
    return 0


def cmd_bench(args) -> int:
    instances = _instances(args.instances)
    methods = {}
    for m in args.methods:
        ns = argparse.Namespace(**{**vars(args), "method": m})
        methods[m] = make_solver(ns)
    rows = bench(instances, methods, reference=args.reference)
    _emit(bench_csv(rows), args.out)
    return 0


def cmd_sensitivity(args) -> int:
    if not args.checkpoint:
        raise SystemExit("sensitivity needs --checkpoint")
    router = RouterKind(args.router)
    router_params = load(args.router_checkpoint) if args.router_checkpoint else None
    rows = sensitivity(_instances(args.instances), args.k_percent or [30.0, 50.0, 100.0],
                       load(args.checkpoint), router, router_params)
    _emit(sensitivity_csv(rows), args.out)
    return 0


def cmd_export_milp(args) -> int:
    inst = load_instance(args.instance)
    _emit(export_lp(build_model(inst, args.vehicles)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdvrp", description="Multi-depot VRP laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--capacity", type=int, default=0, help="0 = size-based default")
    p.add_argument("--dist", choices=[x.value for x in Distribution], default="uniform")
    p.add_argument("--layout", choices=[x.value for x in DepotLayout], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("--instance", required=True)
    _add_solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("oracle", help="exact optimum for tiny instances")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("validate", help="check a solution file against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("train", help="run one training step")
    p.add_argument("--step", type=int, choices=[1, 2, 3], required=True)
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--checkpoint", help="partitioner parameters (step 2 init, step 3 input)")
    p.add_argument("--router-checkpoint", help="router parameters (steps 2 and 3)")
    p.add_argument("--seed", type=int)
    p.add_argument("--log", help="CSV training log")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("bench", help="benchmark methods over instance files")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--methods", nargs="+", choices=METHODS, default=["cluster", "random"])
    p.add_argument("--reference", choices=METHODS)
    _add_solver_flags(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("sensitivity", help="cost ratio over neighbourhood sizes")
    p.add_argument("--instances", nargs="+", required=True)
    p.add_argument("--k-percent", type=float, nargs="+")
    p.add_argument("--checkpoint")
    p.add_argument("--router", choices=[r.value for r in RouterKind], default="2opt")
    p.add_argument("--router-checkpoint")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sensitivity)

    p = sub.add_parser("export-milp", help="write the MILP model in LP format")
    p.add_argument("--instance", required=True)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_export_milp)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
