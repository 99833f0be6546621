"""End-to-end command-line tests: parsing, formats, exit codes, and
byte determinism."""

import csv
import io
import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from condrisk import SolverError, cli

PAYOFF = [0.0, math.log(4.0), 0.5]

SCENARIO = {
    "states": [
        {"name": "up", "prob": 0.25},
        {"name": "mid", "prob": 0.25},
        {"name": "down", "prob": 0.5},
    ],
    "atoms": [["up", "mid"], ["down"]],
    "positions": {
        "payoff": PAYOFF,
        "book": [1.0, 0.5, -0.25],
        "tilt": [0.35, 0.15, 0.5],
    },
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SCENARIO))
    return str(path)


def run_cli(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# happy paths


class TestCommands:
    def test_oce_table(self, capsys, scenario_file):
        code, out, err = run_cli(capsys, ["oce", scenario_file, "--position", "payoff"])
        assert code == 0
        assert err == ""
        lines = out.strip().splitlines()
        assert lines[0].split() == list(cli.COLUMNS)
        assert lines[1].startswith("A0")
        assert lines[2].startswith("A1")
        a0_value = float(lines[1].split()[2])
        assert abs(a0_value - math.log(1.6)) < 1e-9
        a1_value = float(lines[2].split()[2])
        assert abs(a1_value - 0.5) < 1e-9
        assert "optimal_a=" in lines[1]

    def test_oce_json(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--format", "json"]
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["command"] == "oce"
        assert "scenario" not in doc
        assert len(doc["rows"]) == 2
        row = doc["rows"][0]
        assert row["atom"] == "A0"
        assert row["quantity"] == "oce:kl"
        assert abs(row["value"] - math.log(1.6)) < 1e-9
        assert row["residual"] <= 1e-10
        assert isinstance(row["iterations"], int)

    def test_oce_csv(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--format", "csv"]
        )
        assert code == 0
        assert out.splitlines()[0] == ",".join(cli.COLUMNS)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["atom"] for r in rows] == ["A0", "A1"]
        assert abs(float(rows[0]["value"]) - math.log(1.6)) < 1e-9

    def test_dual_matches_oce(self, capsys, scenario_file):
        code_p, out_p, _ = run_cli(
            capsys, ["oce", scenario_file, "--position", "book", "--format", "json"]
        )
        code_d, out_d, _ = run_cli(
            capsys, ["dual", scenario_file, "--position", "book", "--format", "json"]
        )
        assert code_p == 0 and code_d == 0
        primal = json.loads(out_p)["rows"]
        dual = json.loads(out_d)["rows"]
        for p, d in zip(primal, dual):
            assert abs(p["value"] - d["value"]) < 1e-8
        assert dual[0]["quantity"] == "dual:kl"
        assert "multiplier=" in dual[0]["note"]

    def test_generator_selection(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys,
            ["oce", scenario_file, "--position", "book", "--divergence", "power:2",
             "--format", "json"],
        )
        assert code == 0
        assert json.loads(out)["rows"][0]["quantity"] == "oce:power:2"

    def test_gap_self_check(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys,
            ["gap", scenario_file, "--position", "payoff", "--divergence", "chi2",
             "--format", "json"],
        )
        assert code == 0
        doc = json.loads(out)
        for row in doc["rows"]:
            assert row["value"] <= 1e-6
            assert row["note"] == "threshold=1e-06"

    def test_entropic_closed_form(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["entropic", scenario_file, "--position", "payoff", "--format", "json"]
        )
        assert code == 0
        rows = json.loads(out)["rows"]
        assert abs(rows[0]["value"] - math.log(1.6)) < 1e-12
        assert abs(rows[1]["value"] - 0.5) < 1e-12

    def test_divergence_of_a_measure(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["divergence", scenario_file, "--measure", "tilt", "--format", "json"]
        )
        assert code == 0
        rows = json.loads(out)["rows"]
        # atom A0 holds (0.35, 0.15) against (0.25, 0.25): densities 1.4, 0.6
        expected = 0.5 * (1.4 * math.log(1.4) - 0.4) + 0.5 * (0.6 * math.log(0.6) + 0.4)
        assert abs(rows[0]["value"] - expected) < 1e-12
        assert abs(rows[1]["value"]) < 1e-12

    def test_check_reports_pass(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["check", scenario_file, "--operator", "entropic", "--format", "json"]
        )
        assert code == 0
        rows = json.loads(out)["rows"]
        assert {r["quantity"] for r in rows} == {
            "axiom:translation_invariance", "axiom:monotonicity", "axiom:concavity",
            "axiom:locality", "axiom:regularity", "axiom:lipschitz",
        }
        assert all(r["note"] == "pass" for r in rows)
        assert all("counterexample" not in r for r in rows)

    def test_check_reports_failures_with_counterexamples(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys,
            ["check", scenario_file, "--operator", "sq-expectation", "--format", "json"],
        )
        assert code == 0  # diagnosis is the product; a failing axiom is not an error
        rows = json.loads(out)["rows"]
        failed = [r for r in rows if r["note"] == "fail"]
        assert failed
        assert all("counterexample" in r for r in failed)
        assert any(r["quantity"] == "axiom:translation_invariance" for r in failed)

    def test_check_base_functional_is_not_translation_invariant(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys, ["check", scenario_file, "--operator", "iphi:kl", "--format", "json"]
        )
        assert code == 0
        rows = {r["quantity"]: r for r in json.loads(out)["rows"]}
        assert rows["axiom:translation_invariance"]["note"] == "fail"
        assert rows["axiom:monotonicity"]["note"] == "pass"
        assert rows["axiom:concavity"]["note"] == "pass"

    def test_check_table_omits_counterexamples(self, capsys, scenario_file):
        code, out, _ = run_cli(capsys, ["check", scenario_file, "--operator", "sq-expectation"])
        assert code == 0
        assert "counterexample" not in out


class TestEchoInput:
    def test_round_trip(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys,
            ["oce", scenario_file, "--position", "payoff", "--format", "json",
             "--echo-input"],
        )
        assert code == 0
        doc = json.loads(out)
        with open(scenario_file, "r", encoding="utf-8") as fh:
            assert doc["scenario"] == json.load(fh)

    def test_requires_json_format(self, capsys, scenario_file):
        code, out, err = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--echo-input"]
        )
        assert code == 2
        assert "requires --format json" in err


class TestDeterminism:
    @pytest.mark.parametrize("fmt", ["table", "json", "csv"])
    def test_identical_invocations_are_byte_identical(self, capsys, scenario_file, fmt):
        argv = ["dual", scenario_file, "--position", "book", "--format", fmt]
        _, first, _ = run_cli(capsys, argv)
        _, second, _ = run_cli(capsys, argv)
        assert first == second
        assert first  # not vacuous

    def test_installed_entry_point_matches_in_process(self, capsys, scenario_file):
        exe = shutil.which("condrisk")
        if exe is None:
            pytest.skip("console script not on PATH")
        argv = ["oce", scenario_file, "--position", "payoff", "--format", "json"]
        _, in_process, _ = run_cli(capsys, argv)
        proc = subprocess.run([exe] + argv, capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout == in_process


# ---------------------------------------------------------------------------
# tolerance plumbing


class TestTolerances:
    def test_gap_threshold_flag(self, capsys, scenario_file):
        code, out, _ = run_cli(
            capsys,
            ["gap", scenario_file, "--position", "payoff", "--tol", "1e-4",
             "--format", "json"],
        )
        assert code == 0
        assert json.loads(out)["rows"][0]["note"] == "threshold=0.0001"

    def test_environment_tolerance(self, capsys, scenario_file, monkeypatch):
        monkeypatch.setenv("CONDRISK_TOL", "2.5e-7")
        code, out, _ = run_cli(
            capsys, ["gap", scenario_file, "--position", "payoff", "--format", "json"]
        )
        assert code == 0
        assert json.loads(out)["rows"][0]["note"] == "threshold=2.5e-07"

    def test_flag_beats_environment(self, capsys, scenario_file, monkeypatch):
        monkeypatch.setenv("CONDRISK_TOL", "2.5e-7")
        code, out, _ = run_cli(
            capsys,
            ["gap", scenario_file, "--position", "payoff", "--tol", "1e-3",
             "--format", "json"],
        )
        assert code == 0
        assert json.loads(out)["rows"][0]["note"] == "threshold=0.001"

    def test_bad_environment_tolerance(self, capsys, scenario_file, monkeypatch):
        monkeypatch.setenv("CONDRISK_TOL", "not-a-number")
        code, _, err = run_cli(capsys, ["oce", scenario_file, "--position", "payoff"])
        assert code == 2
        assert "CONDRISK_TOL" in err

    def test_nonpositive_tolerance(self, capsys, scenario_file):
        code, _, err = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--tol", "0"]
        )
        assert code == 2
        assert "positive" in err


# ---------------------------------------------------------------------------
# exit codes


class TestExitCodes:
    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, ["oce", str(tmp_path / "nope.json"), "--position", "payoff"]
        )
        assert code == 2
        assert "cannot read scenario file" in err

    def test_invalid_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        code, _, err = run_cli(capsys, ["oce", str(path), "--position", "payoff"])
        assert code == 2
        assert "not valid JSON" in err

    def test_unknown_position(self, capsys, scenario_file):
        code, _, err = run_cli(capsys, ["oce", scenario_file, "--position", "ghost"])
        assert code == 2
        assert "unknown position" in err
        assert "payoff" in err  # the error lists what the scenario defines

    def test_unknown_generator(self, capsys, scenario_file):
        code, _, err = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--divergence", "bogus"]
        )
        assert code == 2
        assert "valid generators" in err

    def test_unknown_operator(self, capsys, scenario_file):
        code, _, err = run_cli(capsys, ["check", scenario_file, "--operator", "bogus"])
        assert code == 2
        assert "valid operators" in err

    def test_bad_probabilities(self, capsys, tmp_path):
        doc = {
            "states": [{"name": "a", "prob": 0.5}, {"name": "b", "prob": 0.6}],
            "atoms": [["a", "b"]],
            "positions": {"x": [0.0, 1.0]},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run_cli(capsys, ["oce", str(path), "--position", "x"])
        assert code == 2
        assert "bad state probabilities" in err

    def test_boolean_prob_is_not_a_number(self, capsys, tmp_path):
        doc = {
            "states": [{"name": "a", "prob": True}, {"name": "b", "prob": 0.5}],
            "atoms": [["a", "b"]],
            "positions": {},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run_cli(capsys, ["check", str(path), "--operator", "min"])
        assert code == 2
        assert "must be a number" in err

    def test_atoms_must_cover_states(self, capsys, tmp_path):
        doc = {
            "states": [{"name": "a", "prob": 0.5}, {"name": "b", "prob": 0.5}],
            "atoms": [["a"]],
            "positions": {"x": [0.0, 1.0]},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, _, err = run_cli(capsys, ["oce", str(path), "--position", "x"])
        assert code == 2
        assert "bad atoms" in err

    def test_measure_that_is_not_a_measure(self, capsys, scenario_file):
        code, _, err = run_cli(capsys, ["divergence", scenario_file, "--measure", "payoff"])
        assert code == 2
        assert "measure 'payoff'" in err

    def test_usage_error_from_argparse(self, capsys, scenario_file):
        code, _, err = run_cli(capsys, ["oce", scenario_file])  # missing --position
        assert code == 2

    def test_unknown_command(self, capsys, scenario_file):
        code, _, _ = run_cli(capsys, ["frobnicate", scenario_file])
        assert code == 2

    def test_help_exits_cleanly(self, capsys):
        code, out, _ = run_cli(capsys, ["--help"])
        assert code == 0
        assert "condrisk" in out

    def test_unattainable_solver_tolerance_is_exit_3(self, capsys, scenario_file):
        # 1e-300 is below what 200 bisection steps can deliver, so the
        # residual check must trip; the rows are still reported
        code, out, _ = run_cli(
            capsys, ["oce", scenario_file, "--position", "payoff", "--tol", "1e-300"]
        )
        assert code == 3
        assert "oce:kl" in out

    def test_solver_error_is_exit_3(self, capsys, scenario_file, monkeypatch):
        def explode(*args, **kwargs):
            raise SolverError("synthetic failure")

        monkeypatch.setattr(cli, "oce_primal", explode)
        code, out, err = run_cli(capsys, ["oce", scenario_file, "--position", "payoff"])
        assert code == 3
        assert out == ""
        assert "solver error" in err

    def test_excessive_gap_is_exit_4(self, capsys, scenario_file):
        # an impossible threshold forces the gap exit; rows still printed
        code, out, _ = run_cli(
            capsys, ["gap", scenario_file, "--position", "payoff", "--tol", "1e-300"]
        )
        assert code == 4
        assert "gap:kl" in out
