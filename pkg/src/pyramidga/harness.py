"""Batched, seeded experiment runner and reporting.

An experiment runs a set of strategy variants over a set of instances, with
`runs_per_instance` repetitions each. Run seeds are derived from
(base_seed, instance id, run index) and never from the strategy, so every
variant starts from identical initial populations and results are comparable.

Cells are independent; with several workers they execute in parallel and the
results are still byte-identical because aggregation is a deterministic fold
over the sorted cell list. Censoring: when no run of a variant finds a
feasible solution for an instance, the instance contributes the worst-case
objective (100 for nurse cost, 0 for mall rent) to the mean.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import mall, nurse
from .engine import ConfigurationError, PyramidConfig, init_pyramid, run
from .partnering import (
    EVAL_TOKENS,
    MATING_TOKENS,
    EvalStrategy,
    MatingStrategy,
    joined_topology,
)

SEED_SCHEME = "pyramidga-seed-v1"
CENSORED_VALUES = {"nurse": 100.0, "mall": 0.0}
CSV_COLUMNS = ("strategy", "instance", "run", "seed", "feasible", "raw",
               "violation", "penalized", "generations", "hillclimb_moves",
               "censored", "stopped_by", "error")


def derive_seed(base_seed: int, instance_id: str, run_index: int) -> int:
    """Versioned hash mix of (base seed, instance, run); never the strategy."""
    blob = f"{SEED_SCHEME}|{base_seed}|{instance_id}|{run_index}".encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


@dataclass
class ExperimentConfig:
    problem: str  # "nurse" | "mall"
    instances: dict  # {"generate": {count, seed, params...}} or {"files": [...]}
    mating: tuple[str, ...] = ("S",)
    evaluation: tuple[str, ...] = ()
    runs_per_instance: int = 20
    base_seed: int = 0
    pyramid: dict = field(default_factory=dict)  # PyramidConfig overrides
    hillclimb: bool = False
    hillclimb_budget: int = 10_000
    max_seconds: float = 60.0
    bounds: Optional[dict] = None  # e.g. {"objective": 8.8} for the Bound row

    def __post_init__(self):
        self.mating = tuple(self.mating)
        self.evaluation = tuple(self.evaluation)
        if self.problem not in ("nurse", "mall"):
            raise ConfigurationError("problem must be 'nurse' or 'mall'")
        if self.runs_per_instance < 1:
            raise ConfigurationError("runs_per_instance must be >= 1")
        if not self.mating and not self.evaluation:
            raise ConfigurationError("at least one strategy must be listed")
        for tok in self.mating:
            if tok != "SGA" and tok not in MATING_TOKENS:
                raise ConfigurationError(
                    f"unknown mating strategy {tok!r}; valid: SGA, "
                    + ", ".join(MATING_TOKENS))
        for tok in self.evaluation:
            if tok not in EVAL_TOKENS:
                raise ConfigurationError(
                    f"unknown evaluation strategy {tok!r}; valid: "
                    + ", ".join(EVAL_TOKENS))
        if self.hillclimb and self.problem != "nurse":
            raise ConfigurationError("the hillclimber is defined for the nurse problem only")

    def variants(self) -> list[tuple[str, str, Optional[str]]]:
        """(label, mating token, eval token or None) rows of the experiment.

        Mating strategies are tested with the plain sub-fitness evaluation;
        evaluation strategies are tested under rank-roulette mating. When both
        lists are given explicitly, the cross product is labelled "M+E".
        """
        if self.evaluation and tuple(self.mating) != ("S",):
            return [(f"{m}+{e}", m, e) for m in self.mating for e in self.evaluation]
        out = []
        if not self.evaluation:
            out.extend((m, m, None) for m in self.mating)
        else:
            out.extend((e, "S", e) for e in self.evaluation)
        return out

    def to_dict(self) -> dict:
        return {
            "format": "pyramid-experiment",
            "version": 1,
            "problem": self.problem,
            "instances": self.instances,
            "mating": list(self.mating),
            "evaluation": list(self.evaluation),
            "runs_per_instance": self.runs_per_instance,
            "base_seed": self.base_seed,
            "pyramid": self.pyramid,
            "hillclimb": self.hillclimb,
            "hillclimb_budget": self.hillclimb_budget,
            "max_seconds": self.max_seconds,
            "bounds": self.bounds,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        if data.get("format") != "pyramid-experiment" or data.get("version") != 1:
            raise ConfigurationError("not a version-1 experiment config")
        keys = ("problem", "instances", "mating", "evaluation",
                "runs_per_instance", "base_seed", "pyramid", "hillclimb",
                "hillclimb_budget", "max_seconds", "bounds")
        return ExperimentConfig(**{k: data[k] for k in keys if k in data})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# instance resolution


def _generate_instances(problem: str, spec: dict) -> list[dict]:
    count = spec.get("count", 1)
    seed = spec.get("seed", 0)
    params = {k: v for k, v in spec.items() if k not in ("count", "seed")}
    out = []
    for i in range(count):
        if problem == "nurse":
            gen_params = nurse.NurseGenParams(**_tupled(params))
            inst = nurse.generate_instance(gen_params, seed + i)
            out.append(nurse.instance_to_dict(inst))
        else:
            inst = mall.generate_mall_instance(mall.MallGenParams(**params), seed + i)
            out.append(mall.instance_to_dict(inst))
    return out


def _tupled(params: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in params.items()}


def resolve_instances(config: ExperimentConfig) -> list[dict]:
    if "files" in config.instances:
        return [json.loads(Path(p).read_text()) for p in config.instances["files"]]
    if "generate" in config.instances:
        return _generate_instances(config.problem, config.instances["generate"])
    raise ConfigurationError("instances must list 'files' or a 'generate' spec")


# ---------------------------------------------------------------------------
# single-cell execution


_INSTANCE_CACHE: dict[str, object] = {}


def _build_problem(problem_kind: str, instance_dict: dict):
    key = (problem_kind, instance_dict["instance_id"])
    cached = _INSTANCE_CACHE.get(key)
    if cached is not None:
        return cached
    if problem_kind == "nurse":
        built = nurse.NurseProblem(nurse.instance_from_dict(instance_dict))
    else:
        built = mall.MallProblem(mall.instance_from_dict(instance_dict))
    if len(_INSTANCE_CACHE) > 64:
        _INSTANCE_CACHE.clear()
    _INSTANCE_CACHE[key] = built
    return built


def _make_refine(instance: nurse.NurseInstance, budget: int):
    """Hillclimb the top population's best solution when it is balanced.
    Results are tracked, not written back, so the GA trajectory is unchanged;
    repeated calls on an unchanged solution are skipped."""
    seen = {"genes": None}

    def refine(genes: np.ndarray, weight: float) -> tuple[np.ndarray, int]:
        key = genes.tobytes()
        if seen["genes"] == key:
            return genes, 0
        seen["genes"] = key
        if not nurse.is_balanced(instance, genes):
            return genes, 0
        result = nurse.hillclimb(instance, genes, weight, budget)
        return result.solution, result.moves

    return refine


def run_cell(problem_kind: str, instance_dict: dict, mating_token: str,
             eval_token: Optional[str], seed: int, pyramid_overrides: dict,
             hillclimb: bool, hillclimb_budget: int,
             max_seconds: Optional[float]) -> dict:
    """Execute one (strategy, instance, run) cell and return its CSV row."""
    problem = _build_problem(problem_kind, instance_dict)
    config = PyramidConfig(sense=problem.sense, rng_seed=seed,
                           max_seconds=max_seconds, **pyramid_overrides)
    if mating_token == "SGA":
        topology = nurse.single_topology(problem, config)
        mating = MatingStrategy("S")
    elif mating_token == "J":
        topology = joined_topology(problem, config)
        mating = MatingStrategy("J")
    else:
        topology = problem.default_topology(config)
        mating = MatingStrategy(mating_token)
    eval_strategy = EvalStrategy(eval_token) if eval_token else None
    refine = None
    if hillclimb and problem_kind == "nurse":
        refine = _make_refine(problem.instance, hillclimb_budget)

    rng = np.random.default_rng(seed)
    state = init_pyramid(problem, topology, config, rng)
    result = run(state, mating, eval_strategy, rng, refine=refine)
    return {
        "seed": seed,
        "feasible": bool(result.feasible),
        "raw": result.best_raw,
        "violation": 0.0 if result.feasible else None,
        "penalized": result.best_penalized,
        "generations": result.generations,
        "hillclimb_moves": result.hillclimb_moves,
        "stopped_by": result.stopped_by,
        "error": "",
    }


def _run_cell_args(args) -> tuple[tuple, dict]:
    key, payload = args
    try:
        return key, run_cell(*payload)
    except Exception as exc:  # noqa: BLE001 -- a failed cell must not kill the batch
        return key, {
            "seed": payload[4], "feasible": False, "raw": None,
            "violation": None, "penalized": None, "generations": 0,
            "hillclimb_moves": 0, "stopped_by": "error",
            "error": f"{type(exc).__name__}: {exc}",
        }


# ---------------------------------------------------------------------------
# experiment driver and aggregation


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    instance_ids: list[str]
    cells: list[dict]  # sorted by (strategy, instance, run)
    per_instance: dict  # (label, instance_id) -> {feasible_runs, value, censored}
    summary: dict  # label -> {"feasibility": float, "objective": float}

    def labels(self) -> list[str]:
        return [label for label, _, _ in self.config.variants()]


def aggregate(config: ExperimentConfig, instance_ids: list[str],
              cells: list[dict]) -> ExperimentReport:
    """Deterministic fold of per-cell results into the report tables."""
    sense = "min" if config.problem == "nurse" else "max"
    censored_value = CENSORED_VALUES[config.problem]
    runs = config.runs_per_instance
    labels = [label for label, _, _ in config.variants()]

    by_key: dict[tuple[str, str], list[dict]] = {}
    for cell in cells:
        by_key.setdefault((cell["strategy"], cell["instance"]), []).append(cell)

    per_instance = {}
    summary = {}
    for label in labels:
        feas_sum = 0.0
        values = []
        for iid in instance_ids:
            group = by_key.get((label, iid), [])
            feasible_runs = sum(1 for c in group if c["feasible"])
            best = None
            for c in group:
                if c["feasible"] and c["raw"] is not None:
                    if best is None or (c["raw"] < best if sense == "min"
                                        else c["raw"] > best):
                        best = c["raw"]
            censored = feasible_runs == 0
            value = censored_value if censored else best
            per_instance[(label, iid)] = {
                "feasible_runs": feasible_runs,
                "value": value,
                "censored": censored,
            }
            feas_sum += feasible_runs / runs
            values.append(value)
        summary[label] = {
            "feasibility": feas_sum / len(instance_ids) if instance_ids else 0.0,
            "objective": sum(values) / len(values) if values else None,
        }
    return ExperimentReport(config, instance_ids, cells, per_instance, summary)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run every (strategy, instance, run) cell and aggregate.

    The cell order, seeds and aggregation are independent of `workers`, so
    the emitted report and CSV are byte-identical at any parallelism degree.
    """
    instance_dicts = resolve_instances(config)
    instance_ids = [d["instance_id"] for d in instance_dicts]
    if len(set(instance_ids)) != len(instance_ids):
        raise ConfigurationError("instance ids must be unique")

    jobs = []
    for label, mating_token, eval_token in config.variants():
        for inst in instance_dicts:
            iid = inst["instance_id"]
            for r in range(config.runs_per_instance):
                seed = derive_seed(config.base_seed, iid, r)
                key = (label, iid, r)
                payload = (config.problem, inst, mating_token, eval_token, seed,
                           config.pyramid, config.hillclimb,
                           config.hillclimb_budget, config.max_seconds)
                jobs.append((key, payload))

    results: dict[tuple, dict] = {}
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            for key, row in pool.imap_unordered(_run_cell_args, jobs, chunksize=1):
                results[key] = row
    else:
        for job in jobs:
            key, row = _run_cell_args(job)
            results[key] = row

    cells = []
    for key, _ in jobs:
        label, iid, r = key
        row = dict(results[key])
        row.update({"strategy": label, "instance": iid, "run": r})
        cells.append(row)
    report = aggregate(config, instance_ids, cells)
    _flag_censored_cells(report)
    return report


def _flag_censored_cells(report: ExperimentReport) -> None:
    for cell in report.cells:
        info = report.per_instance[(cell["strategy"], cell["instance"])]
        cell["censored"] = info["censored"]


# ---------------------------------------------------------------------------
# persistence and rendering


def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "format": "pyramid-results",
        "version": 1,
        "config": report.config.to_dict(),
        "config_digest": report.config.digest(),
        "instances": report.instance_ids,
        "cells": report.cells,
    }


def report_from_dict(data: dict) -> ExperimentReport:
    if data.get("format") != "pyramid-results" or data.get("version") != 1:
        raise ConfigurationError("not a version-1 results file")
    config = ExperimentConfig.from_dict(data["config"])
    report = aggregate(config, data["instances"], data["cells"])
    _flag_censored_cells(report)
    return report


def save_results(report: ExperimentReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=1))


def load_results(path) -> ExperimentReport:
    return report_from_dict(json.loads(Path(path).read_text()))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: ExperimentReport, format: str = "table") -> str:
    """Render the aggregated table or the per-cell CSV, deterministically."""
    if format == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for cell in report.cells:
            lines.append(",".join(_fmt(cell.get(col)) for col in CSV_COLUMNS))
        return "\n".join(lines) + "\n"
    if format != "table":
        raise ConfigurationError(f"unknown report format {format!r}")

    objective_name = "N Cost" if report.config.problem == "nurse" else "M Rent"
    feas_name = ("N Feasibility" if report.config.problem == "nurse"
                 else "M Feasibility")
    rows = []
    if report.config.bounds and "objective" in report.config.bounds:
        rows.append(("Bound", f"{report.config.bounds['objective']:.1f}", "100.0%"))
    for label in report.labels():
        entry = report.summary[label]
        objective = "-" if entry["objective"] is None else f"{entry['objective']:.1f}"
        rows.append((label, objective, f"{100 * entry['feasibility']:.1f}%"))

    headers = ("strategy", objective_name, feas_name)
    widths = [max(len(headers[c]), *(len(r[c]) for r in rows)) if rows
              else len(headers[c]) for c in range(3)]
    out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# ordering verdicts


def verdict(report: ExperimentReport, a: str, b: str, metric: str = "feasibility",
            margin: float = 0.05) -> str:
    """How strategy `a` compares to `b`: better / worse / tied / missing."""
    if a not in report.summary or b not in report.summary:
        return "missing"
    va = report.summary[a][metric]
    vb = report.summary[b][metric]
    if va is None or vb is None:
        return "missing"
    if metric == "objective" and report.config.problem == "nurse":
        va, vb = -va, -vb  # lower cost is better
    if va > vb + margin:
        return "better"
    if va < vb - margin:
        return "worse"
    return "tied"


def compare_orderings(report: ExperimentReport, pairs=None,
                      feasibility_margin: float = 0.05,
                      objective_margin: float = 0.0) -> dict:
    """Pairwise verdicts on feasibility and mean objective for the given
    strategy pairs (all ordered pairs when omitted)."""
    labels = report.labels()
    if pairs is None:
        pairs = [(a, b) for a in labels for b in labels if a != b]
    return {
        (a, b): {
            "feasibility": verdict(report, a, b, "feasibility", feasibility_margin),
            "objective": verdict(report, a, b, "objective", objective_margin),
        }
        for a, b in pairs
    }
