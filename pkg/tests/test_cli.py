"""CLI surface: exit codes, output files, and verify's mutation sensitivity."""

import json
import math
import subprocess
import sys

import pytest

from etaqfi import cli, fisher, geometry, verify

ANALYZE_GOOD = {
    "model": {"kind": "nonreciprocal", "omega": 0.0, "delta": 0.5},
    "time": math.pi,
    "theta": 0.0,
}

SWEEP_GOOD = {
    "model": {"kind": "nonreciprocal", "omega": 0.0, "delta": 0.5},
    "time": math.pi,
    "theta_min": -0.4,
    "theta_max": 1.0,
    "theta_points": 5,
}


def write_config(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# --- analyze -----------------------------------------------------------------------


def test_analyze_prints_report(tmp_path, capsys):
    path = write_config(tmp_path, "job.json", ANALYZE_GOOD)
    assert cli.main(["analyze", path]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["sample"]["cqfi"] == pytest.approx(6.25 * math.pi**2, rel=1e-6)
    assert report["spec"]["theta"] == 0.0


def test_analyze_writes_report_file(tmp_path, capsys):
    path = write_config(tmp_path, "job.json", ANALYZE_GOOD)
    out_dir = tmp_path / "out"
    assert cli.main(["analyze", path, "--out", str(out_dir)]) == 0
    capsys.readouterr()
    written = json.loads((out_dir / "job_report.json").read_text())
    assert written["sample"]["theta"] == 0.0


def test_analyze_missing_file_is_config_error(capsys):
    assert cli.main(["analyze", "/nonexistent/job.json"]) == 2
    assert "config error" in capsys.readouterr().err


def test_analyze_invalid_json_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{nope", encoding="utf-8")
    assert cli.main(["analyze", str(path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_analyze_bad_model_is_config_error(tmp_path, capsys):
    data = dict(ANALYZE_GOOD, model={"kind": "nonreciprocal", "delta": 0.0})
    path = write_config(tmp_path, "bad.json", data)
    assert cli.main(["analyze", path]) == 2
    assert "config error" in capsys.readouterr().err


def test_analyze_broken_phase_is_numerical_failure(tmp_path, capsys):
    data = dict(ANALYZE_GOOD, theta=-1.0)
    path = write_config(tmp_path, "broken.json", data)
    assert cli.main(["analyze", path]) == 3
    err = capsys.readouterr().err
    assert "numerical failure" in err
    assert "BrokenPhase" in err


# --- sweep -------------------------------------------------------------------------


def test_sweep_writes_csv_and_report(tmp_path, capsys):
    path = write_config(tmp_path, "grid.json", SWEEP_GOOD)
    out_dir = tmp_path / "out"
    assert cli.main(["sweep", path, "--out", str(out_dir)]) == 0
    assert "wrote" in capsys.readouterr().out
    csv_lines = (out_dir / "grid.csv").read_text().splitlines()
    assert len(csv_lines) == 6
    assert csv_lines[0] == "theta,t,sqfi,cqfi,bound,term_rot,term_cross,k_diag,flags"
    report = json.loads((out_dir / "grid_report.json").read_text())
    assert report["summary"]["points"] == 5


def test_sweep_needs_exactly_one_source(tmp_path, capsys):
    path = write_config(tmp_path, "grid.json", SWEEP_GOOD)
    assert cli.main(["sweep", path, "--preset", "figure1a"]) == 2
    assert cli.main(["sweep"]) == 2
    capsys.readouterr()


def test_sweep_preset_multiplicative(tmp_path, capsys):
    out_dir = tmp_path / "out"
    assert cli.main(["sweep", "--preset", "multiplicative", "--out", str(out_dir)]) == 0
    capsys.readouterr()
    lines = (out_dir / "multiplicative.csv").read_text().splitlines()
    assert len(lines) == 101
    assert all(line.endswith("BoundSmallT") for line in lines[1:])
    report = json.loads((out_dir / "multiplicative.json").read_text())
    assert report["summary"]["failed_points"] == 0
    assert report["summary"]["bound_violations"] == 0


def test_sweep_unknown_preset_rejected_by_parser(capsys):
    with pytest.raises(SystemExit):
        cli.main(["sweep", "--preset", "figure2"])
    capsys.readouterr()


def test_sweep_flagged_rows_reported(tmp_path, capsys):
    data = dict(SWEEP_GOOD, theta_min=-1.0, theta_max=0.2, theta_points=7)
    path = write_config(tmp_path, "edge.json", data)
    out_dir = tmp_path / "out"
    assert cli.main(["sweep", path, "--out", str(out_dir)]) == 0
    assert "EvalFailed" in capsys.readouterr().out


# --- verify ------------------------------------------------------------------------


def test_verify_fast_passes(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "0 failure(s)" in out


def test_verify_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(verify, "run", lambda level, seed=0: 3)
    assert cli.main(["verify"]) == 4
    capsys.readouterr()


def test_verify_full_flag_passes_level(monkeypatch, capsys):
    seen = {}

    def fake_run(level, seed=0):
        seen["level"] = level
        seen["seed"] = seed
        return 0

    monkeypatch.setattr(verify, "run", fake_run)
    assert cli.main(["verify", "--full", "--seed", "7"]) == 0
    assert seen == {"level": "full", "seed": 7}
    capsys.readouterr()


def test_run_check_unknown_name():
    with pytest.raises(KeyError):
        verify.run_check("no-such-check")


def test_run_emits_one_line_per_check():
    lines = []
    assert verify.run("fast", out=lines.append) == 0
    assert any(line.startswith("ok eig-reconstruction") for line in lines)
    assert any(line.startswith("ok duality-worked-models") for line in lines)
    assert lines[-1].startswith("fast level:")


# --- module entry point ---------------------------------------------------------------


def test_module_runs_preset_sweep(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "etaqfi", "sweep", "--preset", "pt-bound",
         "--out", str(tmp_path)],
        capture_output=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr.decode(errors="replace")
    assert (tmp_path / "pt-bound.csv").exists()
    assert (tmp_path / "pt-bound.json").exists()


def test_module_config_error_exit():
    proc = subprocess.run(
        [sys.executable, "-m", "etaqfi", "analyze", "/nonexistent/job.json"],
        capture_output=True,
        timeout=60,
    )
    assert proc.returncode == 2


# --- verification catches planted defects ----------------------------------------------
#
# The self-check suite exists to catch regressions in the geometry core, so
# these tests plant two classic ones behind monkeypatch and expect the named
# checks to fail loudly, then confirm the clean versions pass.


def test_connection_check_passes_clean():
    verify.run_check("connection-compatibility")


def test_connection_check_catches_sign_flip(monkeypatch):
    orig = geometry.connection

    def flipped(eta_curve, theta, scheme=None):
        gamma, residual = orig(eta_curve, theta, scheme)
        return -gamma, residual

    monkeypatch.setattr(geometry, "connection", flipped)
    with pytest.raises(AssertionError):
        verify.run_check("connection-compatibility")


def test_phase_invariance_check_passes_clean():
    verify.run_check("phase-invariance")


def test_phase_invariance_check_catches_missing_renormalization(monkeypatch):
    monkeypatch.setattr(fisher, "flat_normalized_curve", lambda c: geometry.as_curve(c))
    with pytest.raises(AssertionError):
        verify.run_check("phase-invariance")
