"""End-to-end tests of the command-line interface.

Commands run in-process through ``main(argv)``; sampler settings are kept
tiny so each invocation stays in the seconds range.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from azsem import read_dataset, save_spec, scenario_models, sha256_file
from azsem.cli import _render_report, main


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def cont_setup(tmp_path):
    """Small continuous dataset plus EZ/AZ model configs on disk."""
    data_dir = tmp_path / "sim"
    rc = run_cli("simulate", 1, "continuous", 40, "--seed", 5, "--out", data_dir)
    assert rc == 0
    models = scenario_models("continuous")
    paths = {}
    for name in ("EZ", "AZ", "EFA"):
        p = tmp_path / f"{name}.json"
        save_spec(models[name], p)
        paths[name] = p
    return data_dir / "data.csv", paths


# ------------------------------------------------------------------- simulate

def test_simulate_writes_dataset_truth_manifest(tmp_path):
    out = tmp_path / "sim"
    rc = run_cli("simulate", 2, "binary", 30, "--seed", 7, "--out", out)
    assert rc == 0
    data = read_dataset(out / "data.csv")
    assert data.n == 30 and data.p == 6
    assert all(it.kind == "binary" for it in data.items)
    truth = json.loads((out / "truth.json").read_text())
    assert truth["scenario"] == 2
    assert truth["Lambda"][0] == [1.0, 0.0]
    assert truth["error_cov"][0][1] == 0.2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["command"][0] == "simulate"
    assert str(out / "data.csv") in manifest["outputs"]


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("simulate", 1, "continuous", 25, "--seed", 3, "--out", a) == 0
    assert run_cli("simulate", 1, "continuous", 25, "--seed", 3, "--out", b) == 0
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    c = tmp_path / "c"
    assert run_cli("simulate", 1, "continuous", 25, "--seed", 4, "--out", c) == 0
    assert (a / "data.csv").read_bytes() != (c / "data.csv").read_bytes()


# ------------------------------------------------------------------------ fit

def test_fit_continuous_ez(cont_setup, tmp_path, capsys):
    data_csv, models = cont_setup
    out = tmp_path / "fit"
    rc = run_cli("fit", data_csv, "--model", models["EZ"], "--out", out,
                 "--chains", 2, "--warmup", 150, "--samples", 100, "--seed", 3)
    assert rc == 0
    assert "diagnostics OK" in capsys.readouterr().out
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["ok"] is True
    assert diag["chains"] == 2 and diag["samples"] == 100
    assert diag["max_rhat"] < 1.05
    assert set(diag["rhat"]) == set(diag["ess"])
    assert "Lambda[1,1]" in diag["rhat"]
    header = (out / "draws.csv").read_text().splitlines()[0]
    assert header.startswith("chain,draw,")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["inputs"][str(data_csv)] == sha256_file(data_csv)
    assert manifest["inputs"][str(models["EZ"])] == sha256_file(models["EZ"])
    assert manifest["command"][:2] == ["fit", str(data_csv)]


def test_fit_rerun_is_bit_identical(cont_setup, tmp_path):
    data_csv, models = cont_setup
    a, b = tmp_path / "a", tmp_path / "b"
    args = ("fit", data_csv, "--model", models["EZ"], "--chains", 2,
            "--warmup", 100, "--samples", 60, "--seed", 11)
    assert run_cli(*args, "--out", a) == 0
    assert run_cli(*args, "--out", b) == 0
    assert (a / "draws.csv").read_bytes() == (b / "draws.csv").read_bytes()
    assert (a / "diagnostics.json").read_bytes() == (b / "diagnostics.json").read_bytes()


def test_fit_single_chain_has_no_rhat(cont_setup, tmp_path, capsys):
    data_csv, models = cont_setup
    out = tmp_path / "one"
    rc = run_cli("fit", data_csv, "--model", models["EZ"], "--out", out,
                 "--chains", 1, "--warmup", 80, "--samples", 50, "--seed", 2)
    assert rc == 0
    assert "at least 2 chains" in capsys.readouterr().out
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["rhat"] is None and diag["ess"] is None and diag["ok"] is None
    assert "note" in diag


def test_fit_efa_variant(cont_setup, tmp_path):
    data_csv, models = cont_setup
    out = tmp_path / "efa"
    rc = run_cli("fit", data_csv, "--model", models["EFA"], "--out", out,
                 "--chains", 1, "--warmup", 80, "--samples", 40, "--seed", 6)
    assert rc == 0
    header = (out / "draws.csv").read_text().splitlines()[0]
    assert "Lambda[1,1]" in header


def test_fit_diagnostic_failure_exits_2(tmp_path, capsys):
    sim = tmp_path / "sim"
    assert run_cli("simulate", 2, "binary", 100, "--seed", 9, "--out", sim) == 0
    spec_path = tmp_path / "AZ.json"
    save_spec(scenario_models("binary")["AZ"], spec_path)
    out = tmp_path / "fit"
    rc = run_cli("fit", sim / "data.csv", "--model", spec_path, "--out", out,
                 "--chains", 2, "--warmup", 20, "--samples", 60, "--seed", 4)
    assert rc == 2
    assert "DIAGNOSTIC FAILURE" in capsys.readouterr().out
    # draws and diagnostics are still written
    assert (out / "draws.csv").exists()
    diag = json.loads((out / "diagnostics.json").read_text())
    assert diag["ok"] is False


# --------------------------------------------------------------------- assess

def test_assess_end_to_end(cont_setup, tmp_path, capsys):
    data_csv, models = cont_setup
    out = tmp_path / "assess"
    rc = run_cli("assess", data_csv, "--models", models["EZ"], models["AZ"],
                 "--out", out, "--chains", 1, "--warmup", 100, "--samples", 80,
                 "--folds", 2, "--thin", 8, "--seed", 7)
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["kind"] == "continuous"
    assert report["n"] == 40 and report["folds"] == 2
    assert set(report["ppp"]) == {"EZ", "AZ"}
    assert all(0.0 <= v <= 1.0 for v in report["ppp"].values())
    for m in ("EZ", "AZ"):
        rec = report["scores"][m]
        assert len(rec["per_fold"]) == 2
        assert rec["total"] == pytest.approx(sum(rec["per_fold"]))
        assert rec["fold_diagnostics_ok"] == [None, None]  # single chain
    assert min(report["differences_from_best"].values()) == 0.0
    assert report["verdict"]["outcome"] in (
        "SUPPORT_EZ", "SUPPORT_AZ", "NO_SUPPORT", "OVERFIT_REJECT", "INCONCLUSIVE")
    text = capsys.readouterr().out
    assert "verdict:" in text and "PPP" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert str(out / "report.json") in manifest["outputs"]
    assert len(manifest["inputs"]) == 3  # data + two model configs


def test_assess_needs_two_models(cont_setup, tmp_path, capsys):
    data_csv, models = cont_setup
    rc = run_cli("assess", data_csv, "--models", models["EZ"],
                 "--out", tmp_path / "x")
    assert rc == 1
    assert "at least 2" in capsys.readouterr().err


def test_assess_rejects_duplicate_names(cont_setup, tmp_path, capsys):
    data_csv, models = cont_setup
    rc = run_cli("assess", data_csv, "--models", models["EZ"], models["EZ"],
                 "--out", tmp_path / "x")
    assert rc == 1
    assert "duplicate model name" in capsys.readouterr().err


def test_assess_rejects_item_mismatch(cont_setup, tmp_path, capsys):
    import dataclasses

    from azsem import ItemSpec

    data_csv, models = cont_setup
    spec = scenario_models("continuous")["AZ"]
    renamed = dataclasses.replace(
        spec, items=[ItemSpec(f"z{j + 1}", "continuous") for j in range(6)])
    other = tmp_path / "other.json"
    save_spec(renamed, other)
    rc = run_cli("assess", data_csv, "--models", models["EZ"], other,
                 "--out", tmp_path / "x")
    assert rc == 1
    assert "disagrees with the others on the item set" in capsys.readouterr().err


def test_render_report_without_verdict():
    d = {
        "ppp": {"M1": 0.5, "M2": 0.2},
        "scores": {
            "M1": {"total": 1.0, "per_fold": [1.0], "fold_diagnostics_ok": [True]},
            "M2": {"total": 2.0, "per_fold": [2.0], "fold_diagnostics_ok": [True]},
        },
        "differences_from_best": {"M1": 0.0, "M2": 1.0},
        "verdict": None,
    }
    text = _render_report(d)
    assert "verdict: none" in text
    assert "exact-zero" in text


# ----------------------------------------------------------------- input errors

def test_missing_data_file_exits_1(cont_setup, tmp_path, capsys):
    _, models = cont_setup
    rc = run_cli("fit", tmp_path / "nope.csv", "--model", models["EZ"],
                 "--out", tmp_path / "x")
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bad_model_json_exits_1(cont_setup, tmp_path, capsys):
    data_csv, _ = cont_setup
    bad = tmp_path / "bad.json"
    bad.write_text('{"variant": "EZ",\n  broken\n}')
    rc = run_cli("fit", data_csv, "--model", bad, "--out", tmp_path / "x")
    assert rc == 1
    assert "invalid JSON at line 2" in capsys.readouterr().err


def test_malformed_dataset_exits_1(cont_setup, tmp_path, capsys):
    _, models = cont_setup
    bad = tmp_path / "bad.csv"
    bad.write_text("y1,y2,y3,y4,y5,y6\n1,2,3,4,5,not-a-number\n")
    rc = run_cli("fit", bad, "--model", models["EZ"], "--out", tmp_path / "x")
    assert rc == 1
    err = capsys.readouterr().err
    assert "line 2" in err and "y6" in err


def test_sensitivity_unknown_prior_exits_1(tmp_path, capsys):
    rc = run_cli("sensitivity", "--priors", "flatland", "--out", tmp_path / "x")
    assert rc == 1
    assert "unknown priors" in capsys.readouterr().err


# ------------------------------------------------------- recover / sensitivity

def test_recover_tiny(tmp_path, capsys):
    out = tmp_path / "rec"
    rc = run_cli("recover", "--reps", 2, "--n", 60, "--seed", 5, "--out", out,
                 "--chains", 1, "--warmup", 80, "--samples", 50, "--thin", 2)
    assert rc == 0
    res = json.loads((out / "recovery.json").read_text())
    assert res["replications"] == 2 and res["completed"] == 2
    assert len(res["names"]) == 13 and res["names"][-1] == "rho"
    assert len(res["coverage"]) == 13
    lines = (out / "recovery.csv").read_text().splitlines()
    assert lines[0] == "parameter,truth,coverage,bias_mean,bias_median"
    assert len(lines) == 14
    assert "rho" in capsys.readouterr().out


def test_sensitivity_tiny(tmp_path, capsys):
    out = tmp_path / "sen"
    rc = run_cli("sensitivity", "--n", 50, "--seed", 8, "--out", out,
                 "--chains", 1, "--warmup", 80, "--samples", 50, "--thin", 2,
                 "--priors", "inv_gamma", "uniform")
    assert rc == 0
    res = json.loads((out / "sensitivity.json").read_text())
    assert set(res["means"]) == {"inv_gamma", "uniform"}
    assert len(res["names"]) == 6
    assert res["max_pairwise_gap"] >= 0.0
    assert "max pairwise gap" in capsys.readouterr().out


def test_sensitivity_external_data(cont_setup, tmp_path):
    data_csv, _ = cont_setup
    out = tmp_path / "sen2"
    rc = run_cli("sensitivity", data_csv, "--out", out, "--chains", 1,
                 "--warmup", 60, "--samples", 40, "--thin", 2,
                 "--priors", "inv_gamma")
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert str(data_csv) in manifest["inputs"]


# -------------------------------------------------------------------- plumbing

def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "azsem.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "azsem" in proc.stdout
