"""End-to-end tests of the command line front end."""

import json

import numpy as np
import pytest

import biased_erm_lab.recovery as recovery_mod
from biased_erm_lab import __version__, recheck_sweep_csv
from biased_erm_lab.cli import main
from biased_erm_lab.recovery import ConditionReport, check_conditions


def _read_manifest(out_dir):
    with open(out_dir / "manifest.json") as fh:
        return json.load(fh)


def test_region_writes_csv_svg_and_manifest(tmp_path):
    out = tmp_path / "run"
    code = main([
        "region", "--r", "0.3333", "--p", "0.5",
        "--x", "eta:0.05:0.49", "--y", "beta_pos:0.05:1.0",
        "--steps", "40", "--out", str(out),
    ])
    assert code == 0
    assert recheck_sweep_csv(str(out / "region.csv")) == 0

    blob = (out / "region.svg").read_bytes()
    assert blob.startswith(b"<?xml")
    assert len(blob) < 2 * 1024 * 1024

    manifest = _read_manifest(out)
    assert manifest["command"] == "region"
    assert manifest["version"] == __version__
    assert manifest["outputs"] == ["region.csv", "region.svg"]
    assert manifest["parameters"]["steps"] == 40
    assert manifest["duration_seconds"] > 0


def test_region_respects_format_selection(tmp_path):
    out = tmp_path / "csv_only"
    code = main([
        "region", "--x", "eta:0.05:0.45", "--y", "beta_pos:0.1:1.0",
        "--steps", "5", "--format", "csv", "--out", str(out),
    ])
    assert code == 0
    assert (out / "region.csv").exists()
    assert not (out / "region.svg").exists()


def test_region_rejects_unknown_axis(tmp_path, capsys):
    code = main([
        "region", "--x", "bogus:0:1", "--y", "beta_pos:0.1:1.0",
        "--steps", "5", "--out", str(tmp_path),
    ])
    assert code == 2
    assert "bogus" in capsys.readouterr().err


def test_region_rejects_malformed_axis(tmp_path, capsys):
    code = main([
        "region", "--x", "eta:0.1", "--y", "beta_pos:0.1:1.0",
        "--steps", "5", "--out", str(tmp_path),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "--x" in err


def test_experiment_smoke_run(tmp_path, capsys):
    out = tmp_path / "exp"
    code = main([
        "experiment", "--r", "0.4", "--eta", "0.1",
        "--n", "400", "--reps", "2", "--seed", "3", "--out", str(out),
    ])
    assert code == 0
    captured = capsys.readouterr().out
    assert "recovery rate" in captured

    doc = json.loads((out / "experiment.json").read_text())
    assert len(doc["reps"]) == 2
    assert doc["config"]["n_train"] == 400
    assert doc["config"]["model"]["r"] == 0.4

    lines = (out / "experiment.csv").read_text().splitlines()
    assert len(lines) == 1 + 2

    manifest = _read_manifest(out)
    assert manifest["outputs"] == ["experiment.csv", "experiment.json"]


def test_experiment_requires_sample_size(tmp_path, capsys):
    code = main(["experiment", "--reps", "2", "--out", str(tmp_path)])
    assert code == 2
    assert "--n" in capsys.readouterr().err


def test_experiment_requires_reps(tmp_path, capsys):
    code = main(["experiment", "--n", "100", "--out", str(tmp_path)])
    assert code == 2
    assert "--reps" in capsys.readouterr().err


def test_experiment_constraint_intervention_needs_criterion(tmp_path, capsys):
    code = main([
        "experiment", "--n", "100", "--reps", "1",
        "--intervention", "constraint", "--out", str(tmp_path),
    ])
    assert code == 2
    assert "--constraint" in capsys.readouterr().err


def test_experiment_flag_overrides_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 300, "reps": 2, "eta": 0.1}))
    out = tmp_path / "exp"
    code = main([
        "experiment", "--config", str(cfg), "--eta", "0.3", "--out", str(out),
    ])
    assert code == 0
    manifest = _read_manifest(out)
    assert manifest["parameters"]["eta"] == 0.3   # flag wins
    assert manifest["parameters"]["n"] == 300     # file fills the gap
    assert manifest["parameters"]["r"] == 1 / 3   # default fills the rest


def test_experiment_rejects_unknown_config_fields(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 300, "reps": 2, "bogus_field": 1}))
    code = main(["experiment", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "bogus_field" in capsys.readouterr().err


def test_experiment_constrained_end_to_end(tmp_path):
    out = tmp_path / "eo"
    code = main([
        "experiment", "--r", "0.3333", "--eta", "0.25", "--beta-pos", "0.2",
        "--intervention", "constraint", "--constraint", "eo",
        "--n", "100000", "--reps", "2", "--seed", "12", "--out", str(out),
    ])
    assert code == 0
    doc = json.loads((out / "experiment.json").read_text())
    assert doc["config"]["intervention"]["kind"] == "constraint"
    assert doc["config"]["intervention"]["criterion"] == "equal_opportunity"
    assert doc["recovery_rate"] == 1.0


def test_verify_single_suite_passes(tmp_path, capsys):
    code = main(["verify", "--suite", "dp", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "dp: PASS" in out

    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc[0]["suite"] == "dp"
    assert doc[0]["passed"] is True
    assert doc[0]["failures"] == []
    assert (tmp_path / "manifest.json").exists()


def test_verify_reports_seeded_failures(monkeypatch, capsys):
    """Falsifiability: corrupt the condition checker and the tightness suite
    must notice the disagreement with the solver and fail the run."""

    def flipped(model, bias):
        rep = check_conditions(model, bias)
        return ConditionReport(
            cond_neg=-rep.cond_neg,
            cond_pos=rep.cond_pos,
            recovers=not rep.recovers,
            failing_extreme=rep.failing_extreme,
        )

    monkeypatch.setattr(recovery_mod, "check_conditions", flipped)
    code = main(["verify", "--suite", "tightness", "--trials", "300"])
    assert code == 1
    out = capsys.readouterr().out
    assert "tightness: FAIL" in out
    assert "solver chose" in out


def test_verify_runs_multiple_suites(capsys):
    code = main(["verify", "--suite", "dp", "--suite", "eqodds"])
    assert code == 0
    out = capsys.readouterr().out
    assert "dp: PASS" in out
    assert "eqodds: PASS" in out


def test_table_analytic_only(tmp_path, capsys):
    out = tmp_path / "table"
    code = main(["table", "--analytic-only", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "| unconstrained | No | No | No |" in printed
    assert "| equal_opportunity | Yes | Yes | Yes |" in printed

    csv_lines = (out / "table.csv").read_text().splitlines()
    assert len(csv_lines) == 1 + 12
    assert (out / "table.md").exists()
    manifest = _read_manifest(out)
    assert manifest["outputs"] == ["table.csv", "table.md"]


def test_table_custom_cells_name_the_failure(tmp_path):
    cells = [
        {
            "row": "equalized_odds",
            "column": "labeling",
            "intervention": "constraint",
            "constraint": "eodds",
            "eta": 0.1,
            "nu": 0.3,
            "n": 100,
            "reps": 1,
        }
    ]
    cfg = tmp_path / "cells.json"
    cfg.write_text(json.dumps(cells))
    out = tmp_path / "table"
    code = main([
        "table", "--config", str(cfg), "--analytic-only", "--out", str(out),
    ])
    assert code == 0
    text = (out / "table.csv").read_text()
    assert "equalized_odds,labeling,no" in text
    assert "false positive" in text


def test_unknown_subcommand_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
