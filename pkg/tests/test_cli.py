from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from tmlpredict.cli import main

from .conftest import FIXTURES


@pytest.fixture()
def config_path(tmp_path):
    base = json.loads((FIXTURES / "runconfig.json").read_text(encoding="utf-8"))
    base["out_dir"] = str(tmp_path / "out")
    for key in ("manifest", "typology", "backends", "kb_docs",
                "search_fixture", "aliases"):
        base[key] = str(FIXTURES / Path(base[key]).name)
    base["manifest"] = str(FIXTURES / "manifest.json")
    path = tmp_path / "runconfig.json"
    path.write_text(json.dumps(base), encoding="utf-8")
    return str(path)


def invoke(*args):
    runner = CliRunner()
    result = runner.invoke(main, list(args), catch_exceptions=False)
    return result


class TestIngest:
    def test_reports_corpus_stats(self, config_path):
        result = invoke("ingest", "--config", config_path)
        assert result.exit_code == 0
        assert "machine_translation" in result.output
        assert "removed papers: ['P4', 'P5']" in result.output
        assert "knowledge base: 8 documents" in result.output

    def test_missing_config_fails_actionably(self, tmp_path):
        result = invoke("ingest", "--config", str(tmp_path / "nope.json"))
        assert result.exit_code != 0
        assert "cannot read config" in result.output


class TestBuildBenchmark:
    def test_emits_block_per_instantiable_cell(self, config_path, tmp_path):
        result = invoke(
            "build-benchmark", "--config", config_path,
            "--n-numeric", "2", "--n-comparative", "2",
        )
        assert result.exit_code == 0, result.output
        files = sorted((tmp_path / "out" / "benchmark").glob("*.jsonl"))
        # 3 fixture tasks x 5 scenarios, all instantiable
        assert len(files) == 15
        assert "verified: 60 questions" in result.output

    def test_task_and_scenario_filters(self, config_path, tmp_path):
        result = invoke(
            "build-benchmark", "--config", config_path,
            "--tasks", "code_generation", "--scenarios", "S1,S5",
            "--n-numeric", "1", "--n-comparative", "1",
        )
        assert result.exit_code == 0, result.output
        files = sorted((tmp_path / "out" / "benchmark").glob("*.jsonl"))
        assert [f.name for f in files] == [
            "code_generation__S1.jsonl", "code_generation__S5.jsonl",
        ]


class TestRunAndEvaluate:
    def test_run_then_evaluate_then_report(self, config_path, tmp_path):
        invoke(
            "build-benchmark", "--config", config_path,
            "--tasks", "code_generation", "--scenarios", "S1",
            "--n-numeric", "3", "--n-comparative", "3", "--no-verify",
        )
        result = invoke(
            "run", "--config", config_path,
            "--questions", str(tmp_path / "out" / "benchmark"),
            "--run-id", "r1",
        )
        assert result.exit_code == 0, result.output
        assert "6 conversations" in result.output

        result = invoke("evaluate", "--config", config_path, "--run-id", "r1")
        assert result.exit_code == 0, result.output
        summary = json.loads(
            (tmp_path / "out" / "runs" / "r1" / "summary.json").read_text()
        )
        assert "breakdown" in summary and "diagnostics" in summary

        result = invoke("report", "--config", config_path, "--run-id", "r1")
        assert result.exit_code == 0, result.output
        assert "per task:" in result.output

    def test_same_seed_byte_identical_results(self, config_path, tmp_path):
        invoke(
            "build-benchmark", "--config", config_path,
            "--tasks", "classification_nli", "--scenarios", "S2",
            "--n-numeric", "2", "--n-comparative", "2", "--no-verify",
        )
        questions = str(tmp_path / "out" / "benchmark")
        invoke("run", "--config", config_path, "--questions", questions,
               "--run-id", "ra")
        invoke("run", "--config", config_path, "--questions", questions,
               "--run-id", "rb")
        results_a = (tmp_path / "out" / "runs" / "ra" / "results.jsonl").read_bytes()
        results_b = (tmp_path / "out" / "runs" / "rb" / "results.jsonl").read_bytes()
        assert results_a == results_b

    def test_evaluate_empty_results_exits_zero(self, config_path, tmp_path):
        run_dir = tmp_path / "out" / "runs" / "empty"
        run_dir.mkdir(parents=True)
        (run_dir / "results.jsonl").write_text("", encoding="utf-8")
        result = invoke("evaluate", "--config", config_path, "--run-id", "empty",
                        "--no-diagnostics")
        assert result.exit_code == 0, result.output
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["mae_overall"] is None

    def test_threshold_violation_exits_nonzero(self, config_path, tmp_path):
        invoke(
            "build-benchmark", "--config", config_path,
            "--tasks", "code_generation", "--scenarios", "S4",
            "--n-numeric", "2", "--n-comparative", "0", "--no-verify",
        )
        invoke("run", "--config", config_path,
               "--questions", str(tmp_path / "out" / "benchmark"),
               "--run-id", "rt")
        thresholds = tmp_path / "thresholds.json"
        thresholds.write_text(json.dumps({"max_mae": 0.0001}), encoding="utf-8")
        result = invoke(
            "evaluate", "--config", config_path, "--run-id", "rt",
            "--thresholds", str(thresholds), "--no-judge", "--no-diagnostics",
        )
        assert result.exit_code == 1
        assert "thresholds violated" in result.output


class TestEnvPrecedence:
    def test_env_overrides_file_seed(self, config_path, tmp_path, monkeypatch):
        monkeypatch.setenv("TMLPREDICT_SEED", "123")
        monkeypatch.setenv("TMLPREDICT_OUT_DIR", str(tmp_path / "env_out"))
        result = invoke(
            "build-benchmark", "--config", config_path,
            "--tasks", "code_generation", "--scenarios", "S1",
            "--n-numeric", "1", "--n-comparative", "1", "--no-verify",
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "env_out" / "benchmark").exists()
