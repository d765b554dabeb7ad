# test_cli.py - the multisle command group through click's test runner

import pandas as pd
import pytest
from click.testing import CliRunner

from cli import cli
from exports import read_json
from partition_mc import h_two
from settings import configure_logging
from special_fns import kappa_params


@pytest.fixture
def runner():
    yield CliRunner()
    # the group callback points logging at the runner's captured stderr
    configure_logging("WARNING")


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args], catch_exceptions=False)


class TestTrace:
    def test_same_seed_same_files(self, runner, tmp_path):
        args = ["trace", "--kappa", 3, "--links", "0,inf", "--dt", 0.01, "--t-max", 0.2, "--seed", 1]
        first = invoke(runner, *args, "--out", tmp_path / "a")
        second = invoke(runner, *args, "--out", tmp_path / "b")
        assert first.exit_code == 0 and second.exit_code == 0
        for name in ("trace.csv", "driving.csv"):
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()
        manifest = read_json(tmp_path / "a" / "manifest.json")
        assert manifest["n_steps"] == 20
        assert manifest["config"]["seed"] == 1
        driving = pd.read_csv(tmp_path / "a" / "driving.csv")
        assert list(driving.columns) == ["t", "w"]
        assert driving["w"].iloc[0] == 0.0

    def test_chord_between_finite_points_starts_at_a(self, runner, tmp_path):
        result = invoke(runner, "trace", "--kappa", 3, "--links", "1,3", "--dt", 0.01, "--t-max", 0.1,
                        "--out", tmp_path)
        assert result.exit_code == 0
        trace = pd.read_csv(tmp_path / "trace.csv")
        assert trace["re"].iloc[0] == pytest.approx(1.0)
        assert trace["im"].iloc[0] == pytest.approx(0.0, abs=1e-12)

    def test_kappa_out_of_range(self, runner, tmp_path):
        result = invoke(runner, "trace", "--kappa", 9, "--out", tmp_path)
        assert result.exit_code == 2
        assert "(0, 8)" in result.output

    def test_needs_exactly_one_link(self, runner, tmp_path):
        result = invoke(runner, "trace", "--kappa", 3, "--links", "0,inf;1,2", "--out", tmp_path)
        assert result.exit_code == 2

    def test_missing_kappa(self, runner, tmp_path):
        result = invoke(runner, "trace", "--out", tmp_path)
        assert result.exit_code == 2
        assert "--kappa is required" in result.output


class TestEstimate:
    def test_closed_form_json(self, runner, tmp_path):
        result = invoke(runner, "estimate-h", "--kappa", 3, "--links", "0,inf;1,2", "--out", tmp_path)
        assert result.exit_code == 0
        record = read_json(tmp_path / "estimate.json")
        assert record["value"] == h_two(kappa_params(3.0), "0,inf;1,2")
        assert record["std_error"] == 0.0
        assert record["links"] == [[0.0, "inf"], [1.0, 2.0]]
        assert record["version"] == "1.0.0"

    def test_csv_record(self, runner, tmp_path):
        result = invoke(runner, "estimate-h", "--kappa", 5, "--links", "1,3", "--format", "csv", "--out", tmp_path)
        assert result.exit_code == 0
        frame = pd.read_csv(tmp_path / "estimate.csv")
        assert len(frame) == 1
        assert frame["kappa"].iloc[0] == 5.0
        assert "diagnostics.warnings" in frame.columns

    def test_flags_override_config_file(self, runner, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("kappa=3\nlinks=1,3\nseed=4\n")
        result = invoke(runner, "estimate-h", "--config", config, "--kappa", 5, "--out", tmp_path)
        assert result.exit_code == 0
        record = read_json(tmp_path / "estimate.json")
        assert record["kappa"] == 5.0
        assert record["seed"] == 4
        assert record["links"] == [[1.0, 3.0]]

    def test_bad_config_key(self, runner, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("kappa=3\nflavour=mint\n")
        result = invoke(runner, "estimate-h", "--config", config, "--out", tmp_path)
        assert result.exit_code == 2

    def test_coincident_points(self, runner, tmp_path):
        result = invoke(runner, "estimate-h", "--kappa", 3, "--links", "0,1;1,2", "--out", tmp_path)
        assert result.exit_code == 2


class TestVerify:
    def test_pde_passes(self, runner, tmp_path):
        result = invoke(runner, "verify", "pde", "--kappa", 4, "--out", tmp_path)
        assert result.exit_code == 0
        report = read_json(tmp_path / "verify_pde.json")
        assert report["passed"] is True
        assert len(report["details"]["checks"]) == 4

    @pytest.mark.parametrize("suite", ["symmetry", "covariance"])
    def test_closed_form_suites(self, runner, tmp_path, suite):
        result = invoke(runner, "verify", suite, "--kappa", 3, "--links", "0,3;1,2", "--out", tmp_path)
        assert result.exit_code == 0
        assert (tmp_path / f"verify_{suite}.json").exists()

    def test_csv_checks(self, runner, tmp_path):
        result = invoke(runner, "verify", "pde", "--kappa", 3, "--format", "csv", "--out", tmp_path)
        assert result.exit_code == 0
        checks = pd.read_csv(tmp_path / "verify_pde.csv")
        assert set(checks["status"]) == {"PASS"}

    def test_unknown_suite(self, runner, tmp_path):
        result = invoke(runner, "verify", "telepathy", "--kappa", 3, "--out", tmp_path)
        assert result.exit_code == 2

    def test_suite_precondition(self, runner, tmp_path):
        result = invoke(runner, "verify", "avoidance", "--kappa", 3, "--out", tmp_path)
        assert result.exit_code == 2


def test_version(runner):
    result = invoke(runner, "--version")
    assert result.exit_code == 0
    assert "1.0.0" in result.output
