"""
Tests for the gdrift command line
"""

import json

import pytest

from cli.main import EXIT_CHECKS_FAILED, EXIT_CONFIG_ERROR, EXIT_OK, main
from libs.config_schema import SdeConfig
from libs.measure import Convention
from libs.scenarios import ATOMS_ONLY_TOLERANCE

pytestmark = pytest.mark.integration


@pytest.fixture
def sde_config(tmp_path):
    path = tmp_path / "sde.json"
    path.write_text(
        json.dumps(
            {
                "convention": "right",
                "x0": 0.0,
                "nu": {"atoms": [{"at": 0.0, "weight": 0.25}, {"at": 1.0, "weight": 0.5}]},
            }
        )
    )
    return path


@pytest.fixture
def run_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "sde": {"convention": "symmetric", "nu": {"atoms": [{"at": 0.0, "weight": 1.0}]}},
                "monte_carlo": {"n_paths": 4, "dt": 0.01, "t_end": 0.1, "seed": 2},
            }
        )
    )
    return path


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


class TestInspectionCommands:
    """Test classify, convert, transform and list-scenarios."""

    def test_list_scenarios(self, capsys):
        """Test that the registry listing names the built-in scenarios."""
        assert main(["list-scenarios", "--format", "json"]) == EXIT_OK

        names = [row["name"] for row in _json_out(capsys)["rows"]]
        assert "harrison_shepp_skew" in names
        assert "classification_table" in names

    def test_classify(self, sde_config, capsys):
        """Test one row per atom with its class and vanishing local times."""
        assert main(["classify", "--config", str(sde_config), "--format", "json"]) == EXIT_OK

        rows = _json_out(capsys)["rows"]
        assert [row["at"] for row in rows] == [0.0, 1.0]
        assert rows[1]["class"] == "reflecting_up"
        assert rows[1]["l_minus_zero"] is True

    def test_classify_points(self, sde_config, capsys):
        """Test that listed points are classified, off-atom points as regular."""
        exit_code = main(
            ["classify", "--config", str(sde_config), "--points", "0,0.5,1", "--format", "json"]
        )

        assert exit_code == EXIT_OK
        payload = _json_out(capsys)
        rows = payload["rows"]
        assert [row["class"] for row in rows] == ["regular", "regular", "reflecting_up"]
        assert [row["weight"] for row in rows] == [0.25, 0.0, 0.5]
        assert payload["config"]["points"] == [0.0, 0.5, 1.0]

    def test_classify_bad_points(self, sde_config):
        """Test that a non-numeric point list is a configuration error."""
        assert main(["classify", "--config", str(sde_config), "--points", "0,a"]) == EXIT_CONFIG_ERROR

    def test_convert(self, sde_config, tmp_path, capsys):
        """Test that the printed config loads again and converts back to the original."""
        exit_code = main(["convert", "--config", str(sde_config), "--to", "symmetric"])

        assert exit_code == EXIT_OK
        text = capsys.readouterr().out
        converted = SdeConfig.model_validate_json(text)
        assert converted.convention == Convention.SYMMETRIC
        assert [a.weight for a in converted.nu.atoms] == pytest.approx([1.0 / 3.0, 1.0])

        path = tmp_path / "symmetric.json"
        path.write_text(text)
        assert main(["convert", "--config", str(path), "--to", "right"]) == EXIT_OK

        back = SdeConfig.model_validate_json(capsys.readouterr().out)
        assert back.convention == Convention.RIGHT
        assert [a.at for a in back.nu.atoms] == [0.0, 1.0]
        assert [a.weight for a in back.nu.atoms] == pytest.approx([0.25, 0.5], abs=1e-12)

    def test_convert_writes_config_and_table(self, sde_config, tmp_path, capsys):
        """Test converted.json and the weight table under --out."""
        out = tmp_path / "out"

        exit_code = main(
            ["convert", "--config", str(sde_config), "--to", "symmetric", "--format", "json", "--out", str(out)]
        )

        assert exit_code == EXIT_OK
        assert (out / "converted.json").read_text() == capsys.readouterr().out
        table = json.loads((out / "convert.json").read_text())
        assert table["rows"][0]["converted_weight"] == pytest.approx(1.0 / 3.0)
        assert table["config"]["target"] == "symmetric"


    def test_convert_excluded_weight(self, sde_config):
        """Test that right weight 1/2 has no left counterpart."""
        assert main(["convert", "--config", str(sde_config), "--to", "left"]) == EXIT_CONFIG_ERROR

    def test_transform_writes_file(self, sde_config, tmp_path, capsys):
        """Test the table file and the residual line on stdout."""
        out = tmp_path / "out"

        exit_code = main(
            ["transform", "--config", str(sde_config), "--grid-n", "11", "--out", str(out)]
        )

        assert exit_code == EXIT_OK
        lines = (out / "transform.csv").read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1].split(",")[:3] == ["x", "g", "g_minus"]
        assert len(lines) == 13
        label, value = capsys.readouterr().out.split()
        assert label == "residual_max"
        assert float(value) <= ATOMS_ONLY_TOLERANCE

    def test_transform_reports_residual(self, sde_config, capsys):
        """Test that the table header carries the integral-equation residual."""
        exit_code = main(["transform", "--config", str(sde_config), "--format", "json"])

        assert exit_code == EXIT_OK
        payload = _json_out(capsys)
        assert 0.0 <= payload["config"]["residual_max"] <= ATOMS_ONLY_TOLERANCE
        assert payload["rows"][0]["x"] == -3.0

    def test_transform_bad_grid(self, sde_config):
        """Test that a one-point grid is a configuration error."""
        assert main(["transform", "--config", str(sde_config), "--grid-n", "1"]) == EXIT_CONFIG_ERROR


class TestScenarioCommands:
    """Test scenario runs, exit codes and output files."""

    def test_scenario_to_directory(self, tmp_path):
        """Test that --out writes one report file per scenario."""
        exit_code = main(
            ["scenario", "classification_table", "--out", str(tmp_path), "--format", "json"]
        )

        assert exit_code == EXIT_OK
        assert json.loads((tmp_path / "classification_table.json").read_text())["passed"] is True

    def test_unknown_scenario(self):
        """Test that an unregistered name is a configuration error."""
        assert main(["scenario", "brownian_bridge"]) == EXIT_CONFIG_ERROR

    @pytest.mark.parametrize("assignment", ["beta", "beta=high", "=1"])
    def test_bad_assignment(self, assignment):
        """Test that malformed --set assignments are rejected."""
        assert main(["scenario", "harrison_shepp_skew", "--set", assignment]) == EXIT_CONFIG_ERROR

    def test_invalid_monte_carlo_flag(self):
        """Test that a negative step size is rejected."""
        assert main(["scenario", "absorb", "--dt", "-1"]) == EXIT_CONFIG_ERROR

    def test_invalid_config_file(self, tmp_path):
        """Test that an invalid Monte Carlo config file is rejected."""
        path = tmp_path / "mc.json"
        path.write_text(json.dumps({"n_paths": 0}))

        assert main(["scenario", "absorb", "--config", str(path)]) == EXIT_CONFIG_ERROR

    def test_failed_check_exits_one(self, capsys):
        """Test that an unreachable threshold fails the run."""
        exit_code = main(
            [
                "scenario",
                "no_solution",
                "--n-paths",
                "20",
                "--dt",
                "0.01",
                "--set",
                "min_reached_fraction=2",
            ]
        )

        assert exit_code == EXIT_CHECKS_FAILED
        assert capsys.readouterr().out.startswith("# config: ")

    def test_convergence(self, capsys):
        """Test one row per (dt, eps) pair and the monotonicity flags."""
        exit_code = main(
            [
                "convergence",
                "reflect_one_sided",
                "--dt-list",
                "0.01,0.001",
                "--eps-list",
                "0.2,0.1",
                "--n-paths",
                "5",
                "--format",
                "json",
            ]
        )

        assert exit_code == EXIT_OK
        payload = _json_out(capsys)
        assert len(payload["rows"]) == 2
        assert payload["config"]["monotone"]["l_minus_mean"] is True

    def test_convergence_bad_list(self):
        """Test that a non-numeric list entry is rejected."""
        args = ["convergence", "driftless", "--dt-list", "0.01,x", "--eps-list", "0.1"]

        assert main(args) == EXIT_CONFIG_ERROR


class TestSimulationCommands:
    """Test simulate and the local-time estimate on its output."""

    def test_simulate_then_estimate(self, run_config, tmp_path, capsys):
        """Test the output files and a local-time estimate read back from them."""
        out = tmp_path / "sim"

        assert main(["simulate", "--config", str(run_config), "--write-paths", "--out", str(out)]) == EXIT_OK

        summary = (out / "simulate.csv").read_text().splitlines()
        assert len(summary) == 2 + 4
        assert (out / "simulate_paths.csv").exists()
        written = json.loads((out / "simulate_summary.json").read_text())
        assert written == _json_out(capsys)
        assert written["n_paths"] == 4

        exit_code = main(
            [
                "estimate-loctime",
                "--paths",
                str(out / "simulate_paths.csv"),
                "--path-index",
                "1",
                "--y",
                "0.0",
                "--convention",
                "symmetric",
                "--eps",
                "0.1",
                "--format",
                "json",
            ]
        )

        assert exit_code == EXIT_OK
        rows = _json_out(capsys)["rows"]
        assert len(rows) == 11
        assert rows[0]["L"] == 0.0
        assert all(later["L"] >= earlier["L"] for earlier, later in zip(rows, rows[1:]))

    def test_simulate_overrides(self, run_config, capsys):
        """Test that the stdout summary reflects command-line overrides."""
        assert main(["simulate", "--config", str(run_config), "--n-paths", "3"]) == EXIT_OK

        payload = _json_out(capsys)
        assert payload["n_paths"] == 3
        assert payload["config"]["monte_carlo"]["n_paths"] == 3
        assert payload["status_counts"]["completed"] == 3
        assert payload["status_counts"]["exploded"] == 0
        assert payload["terminal_variance"] >= 0.0

    def test_write_paths_needs_out(self, run_config):
        """Test that --write-paths without --out is rejected."""
        assert main(["simulate", "--config", str(run_config), "--write-paths"]) == EXIT_CONFIG_ERROR

    def test_estimate_missing_column(self, tmp_path, capsys):
        """Test that a path file without the x column is a configuration error."""
        path = tmp_path / "paths.csv"
        path.write_text("# config: {}\npath_index,t,value\n0,0.0,0.0\n0,0.1,0.2\n")

        args = ["estimate-loctime", "--paths", str(path), "--y", "0", "--convention", "right", "--eps", "0.1"]

        assert main(args) == EXIT_CONFIG_ERROR


        payload = _json_out(capsys)
        assert len(payload["rows"]) == 3
        assert payload["config"]["monte_carlo"]["n_paths"] == 3

    def test_estimate_missing_path(self, tmp_path):
        """Test that an absent path index is a configuration error."""
        path = tmp_path / "paths.csv"
        path.write_text("# config: {}\npath_index,t,x\n0,0.0,0.0\n")

        args = ["estimate-loctime", "--paths", str(path), "--y", "0", "--convention", "right", "--eps", "0.1"]

        assert main(args) == EXIT_CONFIG_ERROR

    def test_estimate_unreadable_file(self, tmp_path):
        """Test that an unreadable path file is a configuration error."""
        args = [
            "estimate-loctime",
            "--paths",
            str(tmp_path / "absent.csv"),
            "--y",
            "0",
            "--convention",
            "right",
            "--eps",
            "0.1",
        ]

        assert main(args) == EXIT_CONFIG_ERROR
