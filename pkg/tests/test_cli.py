"""
Unit tests for the command line: exit codes, config errors and deterministic output files.
Uses small engineered models only, so every command finishes in seconds.

Run with: pytest tests/test_cli.py -v
"""
import csv
import json

import pytest
from typer.testing import CliRunner

from k3collapse import __version__
from main import app

runner = CliRunner()


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def make_config(tmp_path, name="job.json", **fields):
    fields.setdefault("out", str(tmp_path / "out"))
    path = tmp_path / name
    path.write_text(json.dumps(fields))
    return str(path)


def invoke(*args):
    return runner.invoke(app, list(args), env={"K3C_CACHE": "off", "K3C_JOBS": "1"})


# ---------------------------------------------------------------------------
# Basics
# ---------------------------------------------------------------------------

class TestBasics:
    def test_version(self):
        result = invoke("version")
        assert result.exit_code == 0
        assert result.output.strip() == __version__


# ---------------------------------------------------------------------------
# Configuration errors exit with 2
# ---------------------------------------------------------------------------

class TestConfigErrors:
    def test_missing_config_file(self, tmp_path):
        result = invoke("fibration", "classify", "--config", str(tmp_path / "nope.json"))
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"] == "ConfigError"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{engineered: ")
        result = invoke("fibration", "classify", "--config", str(path))
        assert result.exit_code == 2

    def test_unknown_engineered_label(self, tmp_path):
        config = make_config(tmp_path, engineered=["XYZ"])
        result = invoke("fibration", "classify", "--config", config)
        assert result.exit_code == 2

    def test_no_fibration_selected(self, tmp_path):
        result = invoke("fibration", "classify", "--config", make_config(tmp_path))
        assert result.exit_code == 2

    def test_invalid_field(self, tmp_path):
        config = make_config(tmp_path, engineered=["II"], volume={"levels": 3})
        result = invoke("volume", "fit", "--config", config)
        assert result.exit_code == 2
        assert json.loads(result.stderr)["diagnostics"]["errors"]

    def test_report_without_summaries(self, tmp_path):
        result = invoke("report", "--out", str(tmp_path / "empty"))
        assert result.exit_code == 2


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

class TestFibrationClassify:
    def test_writes_summary_and_csv(self, tmp_path):
        config = make_config(tmp_path, engineered=["II", "III"])
        result = invoke("fibration", "classify", "--config", config)
        assert result.exit_code == 0
        out = tmp_path / "out"
        summary = json.loads((out / "fibration.json").read_text())
        assert set(summary["fibrations"]) == {"engineered-II", "engineered-III"}
        assert summary["fibrations"]["engineered-II"]["minimality_violations"] == ["inf"]
        assert (out / "fibers_engineered-II.csv").exists()

    def test_output_is_byte_identical_across_runs(self, tmp_path):
        first = make_config(tmp_path, "a.json", engineered=["II", "III"], out=str(tmp_path / "a"))
        second = make_config(tmp_path, "b.json", engineered=["II", "III"], out=str(tmp_path / "b"))
        assert invoke("fibration", "classify", "--config", first).exit_code == 0
        assert invoke("fibration", "classify", "--config", second).exit_code == 0
        for name in ("fibration.json", "fibers_engineered-II.csv", "fibers_engineered-III.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_flag_overrides_config_out(self, tmp_path):
        config = make_config(tmp_path, engineered=["II"])
        result = invoke("fibration", "classify", "--config", config, "--out", str(tmp_path / "flag"))
        assert result.exit_code == 0
        assert (tmp_path / "flag" / "fibration.json").exists()


class TestVolumeFit:
    @pytest.mark.parametrize("label", ["II", "IV*"])
    def test_homogeneous_model_passes(self, tmp_path, label):
        config = make_config(tmp_path, engineered=[label])
        result = invoke("volume", "fit", "--config", config)
        assert result.exit_code == 0
        summary = json.loads((tmp_path / "out" / "volume.json").read_text())
        (entry,) = summary["volume"][f"engineered-{label}"]
        assert entry["mass_converged"]
        assert not (tmp_path / "out" / "failures.json").exists()

    def test_fit_below_minimum_radius_is_a_recorded_failure(self, tmp_path):
        config = make_config(tmp_path, engineered=["II"], volume={"rho0": 1e-5, "levels": 12})
        result = invoke("volume", "fit", "--config", config)
        assert result.exit_code == 1
        failures = json.loads((tmp_path / "out" / "failures.json").read_text())
        assert "DomainError" in {f["error"] for f in failures["failures"]}


class TestMetricFailures:
    def test_mesh_without_room_for_rings_is_a_recorded_failure(self, tmp_path):
        config = make_config(tmp_path, engineered=["II"], metric={"mesh": {"r_min": 0.3}, "refinements": 0})
        result = invoke("metric", "diameter", "--config", config)
        assert result.exit_code == 1
        failures = json.loads((tmp_path / "out" / "failures.json").read_text())
        assert failures["failures"][0]["error"] == "MeshError"
        assert failures["failures"][0]["fibration"] == "engineered-II"


class TestPeriodSample:
    def test_j_invariant_is_consistent(self, tmp_path):
        config = make_config(tmp_path, engineered=["I1", "III"], periods={"samples": 8})
        result = invoke("periods", "sample", "--config", config)
        assert result.exit_code == 0
        summary = json.loads((tmp_path / "out" / "periods.json").read_text())
        for entry in summary["periods"].values():
            assert entry["max_j_defect"] < 1e-8
        with open(tmp_path / "out" / "periods_engineered-I1.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(row["j_defect"]) < 1e-8 for row in rows)


class TestReport:
    def test_aggregates_summaries(self, tmp_path):
        config = make_config(tmp_path, engineered=["II"])
        assert invoke("fibration", "classify", "--config", config).exit_code == 0
        result = invoke("report", "--config", config)
        assert result.exit_code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert list(report["summaries"]) == ["fibration"]


class TestFibrationFile:
    def test_classify_from_file(self, tmp_path):
        # a = 0, b = t − 1: a single type II fiber at t = 1
        fib = tmp_path / "cusp.json"
        fib.write_text(json.dumps({"label": "cusp", "a": [[0, 0]], "b": [[-1, 0], [1, 0]]}))
        config = make_config(tmp_path, fibration=str(fib))
        assert invoke("fibration", "classify", "--config", config).exit_code == 0
        with open(tmp_path / "out" / "fibers_cusp.csv") as fh:
            (row,) = list(csv.DictReader(fh))
        assert row["type"] == "II"
        assert float(row["location_re"]) == pytest.approx(1.0)
        assert row["alpha_pred"] == "-1/3"

    def test_unreadable_fibration_file(self, tmp_path):
        config = make_config(tmp_path, fibration=str(tmp_path / "missing.json"))
        assert invoke("fibration", "classify", "--config", config).exit_code == 2


class TestPeriodCacheCoherence:
    def test_cached_run_matches_uncached(self, tmp_path):
        cache = str(tmp_path / "periods.jsonl")
        fields = {"engineered": ["II"], "periods": {"samples": 8}}
        outputs = []
        for name, cache_path in (("off", "off"), ("cold", cache), ("warm", cache)):
            config = make_config(tmp_path, f"{name}.json", out=str(tmp_path / name), **fields)
            result = invoke("periods", "sample", "--config", config, "--cache", cache_path)
            assert result.exit_code == 0
            outputs.append((tmp_path / name / "periods_engineered-II.csv").read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]
        assert (tmp_path / "periods.jsonl").exists()
