"""Command line interface contracts."""

import json
from pathlib import Path

import pytest

from pyramidga import cli, harness, nurse


def run_cli(args):
    return cli.main(args)


class TestGenerate:
    def test_writes_instance_files(self, tmp_path, capsys):
        code = run_cli(["generate", "--problem", "nurse", "--count", "2",
                        "--seed", "7", "--nurses", "6", "--out", str(tmp_path)])
        assert code == 0
        files = sorted(tmp_path.glob("*.json"))
        assert len(files) == 2
        inst = nurse.load_instance(files[0])
        assert inst.num_nurses == 6

    def test_mall_generation(self, tmp_path):
        code = run_cli(["generate", "--problem", "mall", "--count", "1",
                        "--types", "25", "--out", str(tmp_path)])
        assert code == 0
        data = json.loads(next(tmp_path.glob("*.json")).read_text())
        assert data["format"] == "mall-instance"
        assert data["num_types"] == 25


class TestRun:
    def test_run_writes_reports_and_exits_zero(self, tmp_path, capsys):
        code = run_cli([
            "run", "--problem", "nurse", "--mating", "C", "--runs", "2",
            "--seed", "42", "--generate", "1", "--nurses", "8",
            "--tightness", "0.7", "--population", "64", "--sub-population", "6",
            "--out", str(tmp_path)])
        assert code == 0
        for name in ("results.json", "cells.csv", "report.txt", "meta.json"):
            assert (tmp_path / name).exists()
        table = capsys.readouterr().out
        assert "strategy" in table and "C" in table

    def test_run_from_instance_files(self, tmp_path):
        inst_dir = tmp_path / "instances"
        run_cli(["generate", "--problem", "nurse", "--count", "2", "--seed", "3",
                 "--nurses", "8", "--out", str(inst_dir)])
        files = [str(p) for p in sorted(inst_dir.glob("*.json"))]
        code = run_cli(["run", "--problem", "nurse", "--mating", "S",
                        "--runs", "1", "--population", "64",
                        "--sub-population", "6", "--instances", *files,
                        "--out", str(tmp_path / "results")])
        assert code == 0
        csv = (tmp_path / "results" / "cells.csv").read_text()
        assert len(csv.splitlines()) == 1 + 2  # header + 2 cells

    def test_unknown_strategy_token_exits_two(self, tmp_path, capsys):
        code = run_cli(["run", "--problem", "nurse", "--mating", "Q",
                        "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert "S, R, B, D, J, A, C" in err

    def test_eval_strategy_flag(self, tmp_path):
        code = run_cli([
            "run", "--problem", "nurse", "--eval", "RR", "--runs", "1",
            "--generate", "1", "--nurses", "8", "--tightness", "0.7",
            "--population", "64", "--sub-population", "6",
            "--out", str(tmp_path), "--format", "csv"])
        assert code == 0
        csv = (tmp_path / "cells.csv").read_text()
        assert csv.splitlines()[1].startswith("RR,")

    def test_config_file_round_trip(self, tmp_path):
        config = harness.ExperimentConfig(
            problem="nurse",
            instances={"generate": {"count": 1, "seed": 5, "num_nurses": 8,
                                    "demand_tightness": 0.7}},
            mating=("S",), runs_per_instance=1, base_seed=11,
            pyramid={"total_population": 64, "sub_population_size": 6,
                     "top_population_size": 22, "stagnation_limit": 6})
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_dict()))
        code = run_cli(["run", "--config", str(path), "--out", str(tmp_path)])
        assert code == 0


class TestReport:
    def test_rerender_matches_original(self, tmp_path, capsys):
        run_cli(["run", "--problem", "nurse", "--mating", "S", "--runs", "1",
                 "--generate", "1", "--nurses", "8", "--tightness", "0.7",
                 "--population", "64", "--sub-population", "6",
                 "--out", str(tmp_path)])
        capsys.readouterr()
        code = run_cli(["report", "--results", str(tmp_path / "results.json")])
        assert code == 0
        assert capsys.readouterr().out == (tmp_path / "report.txt").read_text()

    def test_missing_results_file_exits_two(self, tmp_path, capsys):
        code = run_cli(["report", "--results", str(tmp_path / "nope.json")])
        assert code == 2


class TestOracle:
    def test_nurse_oracle_prints_optimum(self, capsys):
        code = run_cli(["oracle", "--problem", "nurse", "--max-nurses", "4",
                        "--seed", "3", "--count", "2"])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert all("optimum=" in line or "infeasible" in line for line in lines)

    def test_mall_oracle_prints_optimum(self, capsys):
        code = run_cli(["oracle", "--problem", "mall", "--max-locations", "6",
                        "--max-types", "3", "--areas", "2", "--seed", "3"])
        assert code == 0
        assert "space=729" in capsys.readouterr().out


class TestSelftest:
    def test_selftest_passes(self, capsys):
        assert run_cli(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "ok" in out
