"""Command line interface.

Subcommands: `generate` instance sets, `run` an experiment, `report` persisted
results, `oracle` tiny instances by exhaustive enumeration, and `selftest`.
Exit codes: 0 on success, 2 on usage or configuration errors, 1 on failures.

Environment overrides: PYRAMIDGA_OUT (output directory), PYRAMIDGA_JOBS
(parallel workers for experiment cells).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import harness, mall, nurse, oracle
from .engine import ConfigurationError, InstanceError
from .selftest import run_selftest


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("PYRAMIDGA_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(args) -> int:
    if getattr(args, "jobs", None):
        return args.jobs
    env = os.environ.get("PYRAMIDGA_JOBS")
    return max(1, int(env)) if env else 1


def _cmd_generate(args) -> int:
    out = _out_dir(args)
    paths = []
    for i in range(args.count):
        seed = args.seed + i
        if args.problem == "nurse":
            params = nurse.NurseGenParams(num_nurses=args.nurses,
                                          demand_tightness=args.tightness)
            inst = nurse.generate_instance(params, seed)
            path = out / f"{inst.instance_id}.json"
            nurse.save_instance(inst, path)
        else:
            params = mall.MallGenParams(locations=args.locations,
                                        num_types=args.types,
                                        tightness=args.tightness)
            inst = mall.generate_mall_instance(params, seed)
            path = out / f"{inst.instance_id}.json"
            mall.save_instance(inst, path)
        paths.append(path)
        print(path)
    return 0


def _experiment_config(args) -> harness.ExperimentConfig:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        return harness.ExperimentConfig.from_dict(data)
    if args.instances:
        instances = {"files": sorted(args.instances)}
    else:
        generate = {"count": args.generate, "seed": args.seed + 1_000_003}
        if args.problem == "nurse":
            generate["num_nurses"] = args.nurses
            generate["demand_tightness"] = args.tightness
        else:
            generate["locations"] = args.locations
            generate["num_types"] = args.types
            generate["tightness"] = args.tightness
        instances = {"generate": generate}
    pyramid = {}
    if args.population:
        pyramid["total_population"] = args.population
    if args.sub_population:
        pyramid["sub_population_size"] = args.sub_population
    return harness.ExperimentConfig(
        problem=args.problem,
        instances=instances,
        mating=tuple(args.mating.split(",")) if args.mating else ("S",),
        evaluation=tuple(args.eval.split(",")) if args.eval else (),
        runs_per_instance=args.runs,
        base_seed=args.seed,
        pyramid=pyramid,
        hillclimb=args.hillclimb,
    )


def _cmd_run(args) -> int:
    config = _experiment_config(args)
    started = time.time()
    report = harness.run_experiment(config, workers=_workers(args))
    out = _out_dir(args)
    harness.save_results(report, out / "results.json")
    (out / "cells.csv").write_text(harness.emit_report(report, "csv"))
    table = harness.emit_report(report, "table")
    (out / "report.txt").write_text(table)
    (out / "meta.json").write_text(json.dumps({
        "config_digest": config.digest(),
        "started": started,
        "elapsed_seconds": time.time() - started,
    }, indent=1))
    if args.format == "csv":
        print(harness.emit_report(report, "csv"), end="")
    else:
        print(table, end="")
    return 0


def _cmd_report(args) -> int:
    report = harness.load_results(args.results)
    print(harness.emit_report(report, args.format), end="")
    return 0


def _cmd_oracle(args) -> int:
    for i in range(args.count):
        seed = args.seed + i
        if args.problem == "nurse":
            params = nurse.NurseGenParams(
                num_nurses=args.max_nurses, day_counts=(6,), night_counts=(6,),
                both_fraction=0.0, demand_tightness=args.tightness)
            inst = nurse.generate_instance(params, seed)
            result = oracle.enumerate_nurse_optimum(inst)
        else:
            params = mall.MallGenParams(
                locations=args.max_locations, areas=args.areas,
                num_types=args.max_types, tightness=args.tightness)
            inst = mall.generate_mall_instance(params, seed)
            result = oracle.enumerate_mall_optimum(inst)
        if result.feasible_exists:
            print(f"{inst.instance_id} space={result.space} "
                  f"optimum={result.best_raw:g} genes={result.best_genes}")
        else:
            print(f"{inst.instance_id} space={result.space} infeasible")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyramidga",
        description="Hierarchical coevolutionary GA benchmark for nurse "
                    "rostering and mall tenant selection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--problem", choices=("nurse", "mall"), default="nurse")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", help="output directory (or PYRAMIDGA_OUT)")

    gen = sub.add_parser("generate", help="write synthetic instance files")
    add_common(gen)
    gen.add_argument("--count", type=int, default=10)
    gen.add_argument("--nurses", type=int, default=30)
    gen.add_argument("--locations", type=int, default=100)
    gen.add_argument("--types", type=int, default=30)
    gen.add_argument("--tightness", type=float, default=0.5)
    gen.set_defaults(func=_cmd_generate)

    runp = sub.add_parser("run", help="run an experiment and write reports")
    add_common(runp)
    runp.add_argument("--config", help="experiment config JSON (overrides flags)")
    runp.add_argument("--mating", help="comma-separated mating tokens (S,R,B,D,J,A,C,SGA)")
    runp.add_argument("--eval", help="comma-separated evaluation tokens (S,R,B,D,SR,BR,RR)")
    runp.add_argument("--runs", type=int, default=20)
    runp.add_argument("--instances", nargs="*", help="instance files")
    runp.add_argument("--generate", type=int, default=5,
                      help="generate this many instances when none are given")
    runp.add_argument("--nurses", type=int, default=30)
    runp.add_argument("--locations", type=int, default=100)
    runp.add_argument("--types", type=int, default=30)
    runp.add_argument("--tightness", type=float, default=0.5)
    runp.add_argument("--population", type=int)
    runp.add_argument("--sub-population", type=int, dest="sub_population")
    runp.add_argument("--hillclimb", action="store_true")
    runp.add_argument("--jobs", type=int)
    runp.add_argument("--format", choices=("table", "csv"), default="table")
    runp.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="re-render persisted results")
    rep.add_argument("--results", required=True)
    rep.add_argument("--format", choices=("table", "csv"), default="table")
    rep.set_defaults(func=_cmd_report)

    orc = sub.add_parser("oracle", help="enumerate tiny instances exhaustively")
    add_common(orc)
    orc.add_argument("--count", type=int, default=1)
    orc.add_argument("--max-nurses", type=int, default=4, dest="max_nurses")
    orc.add_argument("--max-locations", type=int, default=8, dest="max_locations")
    orc.add_argument("--max-types", type=int, default=3, dest="max_types")
    orc.add_argument("--areas", type=int, default=4)
    orc.add_argument("--tightness", type=float, default=0.4)
    orc.set_defaults(func=_cmd_oracle)

    st = sub.add_parser("selftest", help="run the invariant battery")
    st.set_defaults(func=lambda args: run_selftest())
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
