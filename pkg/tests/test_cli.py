"""Command-line surface: exit codes, formats, round trips, seeds."""

import json
import os

import numpy as np
import pytest

from mdgof.cli import main
from mdgof.data import read_csv
from mdgof.gof import ACCEPTED, REJECTED
from mdgof.gof import test_sequential_mar as run_sequential_mar


@pytest.fixture
def graph_json(tmp_path):
    path = tmp_path / "graph.json"
    path.write_text(json.dumps({
        "variables": ["X1", "X2"],
        "edges": [["X1", "X2"], ["X1*", "R2"]],
        "order": ["X1", "X2"],
    }))
    return str(path)


def emit_dataset(tmp_path, scenario, seed, n=4000):
    path = str(tmp_path / f"{scenario}.csv")
    code = main(["simulate", "--scenario", scenario, "--n", str(n),
                 "--K", "3", "--seed", str(seed), "--emit-data", path])
    assert code == 0
    return path


class TestExitCodes:
    def test_usage_error_on_bad_subcommand(self):
        assert main(["frobnicate"]) == 64

    def test_usage_error_on_missing_required(self):
        assert main(["test", "--model", "sequential-mar"]) == 64

    def test_order_required_for_sequential(self, tmp_path):
        path = emit_dataset(tmp_path, "mar-null", 1)
        assert main(["test", "--input", path,
                     "--model", "sequential-mar"]) == 64

    def test_data_error_on_missing_file(self):
        assert main(["test", "--input", "/nonexistent.csv",
                     "--model", "block-parallel"]) == 65

    def test_data_error_on_fully_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("X1,X2\n1.0,NA\n2.0,NA\n")
        assert main(["test", "--input", str(path), "--order", "X1,X2",
                     "--model", "sequential-mar"]) == 65

    def test_bad_alpha_is_usage_error(self, tmp_path):
        path = emit_dataset(tmp_path, "mar-null", 1)
        assert main(["test", "--input", path, "--order", "X1,X2,X3",
                     "--model", "sequential-mar", "--alpha", "2.0"]) == 64

    def test_bad_threads_env_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MDAG_GOF_THREADS", "many")
        assert main(["simulate", "--scenario", "mar-null", "--n", "200",
                     "--reps", "1", "--seed", "0"]) == 64

    def test_verdict_exit_codes_match_library(self, tmp_path):
        for scenario, seed in (("mar-null", 1), ("mar-alt", 0)):
            path = emit_dataset(tmp_path, scenario, seed, n=8000)
            data = read_csv(path)
            report = run_sequential_mar(data, data.names)
            expected = {ACCEPTED: 0, REJECTED: 1}[report.verdict]
            code = main(["test", "--input", path, "--order", "X1,X2,X3",
                         "--model", "sequential-mar"])
            assert code == expected


class TestTestCommand:
    def test_json_report_written(self, tmp_path, capsys):
        path = emit_dataset(tmp_path, "mar-null", 1)
        out = str(tmp_path / "report.json")
        code = main(["test", "--input", path, "--order", "X1,X2,X3",
                     "--model", "sequential-mar", "--output", out])
        assert code in (0, 1)
        report = json.loads(open(out).read())
        assert report["model"] == "sequential-MAR"
        assert report["order"] == ["X1", "X2", "X3"]

    def test_round_trip_verdicts_identical(self, tmp_path):
        path = emit_dataset(tmp_path, "mnar-null", 2)
        data = read_csv(path)
        rewritten = str(tmp_path / "rewritten.csv")
        data.to_csv(rewritten)
        out1, out2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        c1 = main(["test", "--input", path, "--order", "X1,X2,X3",
                   "--model", "sequential-mnar", "--output", out1])
        c2 = main(["test", "--input", rewritten, "--order", "X1,X2,X3",
                   "--model", "sequential-mnar", "--output", out2])
        assert c1 == c2
        assert open(out1).read() == open(out2).read()

    def test_block_parallel_runs_without_order(self, tmp_path):
        path = emit_dataset(tmp_path, "bp-null", 3, n=2500)
        code = main(["test", "--input", path, "--model", "block-parallel",
                     "--seed", "0", "--bootstrap", "40",
                     "--output", str(tmp_path / "bp.json")])
        assert code in (0, 1, 2)


class TestSimulateCommand:
    def test_study_csv_shape(self, tmp_path):
        out = str(tmp_path / "study.csv")
        code = main(["simulate", "--scenario", "mar-null", "--K", "3",
                     "--n", "500", "--reps", "2", "--seed", "5",
                     "--output", out])
        assert code == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "n,acceptance_rate,complete_case_pct,inconclusive"
        assert lines[1].startswith("500,")

    def test_sweep_csv_rows(self, tmp_path):
        out = str(tmp_path / "sweep.csv")
        code = main(["simulate", "--scenario", "mar-null", "--K", "3",
                     "--reps", "2", "--seed", "5", "--n-grid", "300:700:200",
                     "--output", out])
        assert code == 0
        lines = open(out).read().strip().splitlines()
        assert len(lines) == 4  # header plus grid points 300, 500, 700

    def test_same_seed_same_file(self, tmp_path):
        a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        args = ["simulate", "--scenario", "mnar-null", "--K", "3",
                "--n", "400", "--reps", "2", "--seed", "9"]
        assert main(args + ["--output", a]) == 0
        assert main(args + ["--output", b]) == 0
        assert open(a).read() == open(b).read()

    def test_missing_seed_printed(self, capsys):
        code = main(["simulate", "--scenario", "mar-null", "--K", "2",
                     "--n", "200", "--reps", "1"])
        assert code == 0
        assert "seed:" in capsys.readouterr().err

    def test_bp_theta_table(self, tmp_path):
        out = str(tmp_path / "bp.csv")
        code = main(["simulate", "--scenario", "bp-null", "--K", "3",
                     "--n", "1500", "--reps", "2", "--seed", "4",
                     "--bootstrap", "40", "--output", out])
        assert code == 0
        lines = open(out).read().strip().splitlines()
        assert lines[0] == "rep,theta_hat,ci_lo,ci_hi"

    def test_bad_grid_spec(self):
        assert main(["simulate", "--scenario", "mar-null",
                     "--n-grid", "10,20", "--seed", "0"]) == 64

    def test_emit_data_round_trips(self, tmp_path):
        path = emit_dataset(tmp_path, "mar-null", 7, n=300)
        data = read_csv(path)
        assert data.names == ("X1", "X2", "X3")
        assert data.n == 300


class TestGraphCommand:
    def test_dsep_json(self, graph_json, capsys):
        code = main(["graph", "dsep", "--graph", graph_json,
                     "--x", "R1", "--y", "X2", "--given", "R2", "--json"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["d_separated"] is False

    def test_classify(self, graph_json, capsys):
        code = main(["graph", "classify", "--graph", graph_json])
        assert code == 0
        assert "sequential-MAR" in capsys.readouterr().out

    def test_count_params(self, graph_json, capsys):
        code = main(["graph", "count-params", "--graph", graph_json, "--json"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out == {"full_law": 7, "saturated_observed_law": 8}

    def test_structures_clean(self, graph_json, capsys):
        code = main(["graph", "structures", "--graph", graph_json, "--json"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["clean"] is True

    def test_dsep_requires_sets(self, graph_json):
        assert main(["graph", "dsep", "--graph", graph_json]) == 64

    def test_invalid_graph_is_data_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"variables": ["X1"],
                                    "edges": [["R1", "X1"]]}))
        assert main(["graph", "classify", "--graph", str(path)]) == 65


class TestVerifyCounterexample:
    def test_text_output_passes(self, capsys):
        assert main(["verify-counterexample"]) == 0
        out = capsys.readouterr().out
        assert "verified: True" in out

    def test_json_output_has_fractions(self, capsys):
        assert main(["verify-counterexample", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["verified"] is True
        assert payload["shared_observed_law"]["0,0,?,?"] == "17/25"

    def test_repeated_runs_identical(self, capsys):
        main(["verify-counterexample", "--format", "json"])
        first = capsys.readouterr().out
        main(["verify-counterexample", "--format", "json"])
        assert capsys.readouterr().out == first
