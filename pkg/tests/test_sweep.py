"""Sweep jobs: config validation, grids, CSV rendering, reports, determinism."""

import math

import numpy as np
import pytest

from etaqfi import fisher, sweep
from etaqfi.errors import BrokenPhase, ConfigError
from etaqfi.fisher import QfiSample
from etaqfi.geometry import FdScheme


def additive_config(**overrides):
    data = {
        "model": {"kind": "nonreciprocal", "omega": 0.0, "delta": 0.5},
        "time": math.pi,
        "theta_min": -0.4,
        "theta_max": 1.0,
        "theta_points": 8,
    }
    data.update(overrides)
    return data


# --- config validation -------------------------------------------------------------


class TestParseConfig:
    def test_minimal_sweep_config(self):
        cfg = sweep.parse_config(additive_config(), "sweep")
        assert cfg.time == pytest.approx(math.pi)
        assert cfg.theta_points == 8
        assert cfg.probe == "ground"
        assert cfg.gauge == "closed-form"

    def test_mode_must_be_known(self):
        with pytest.raises(ValueError, match="mode"):
            sweep.parse_config(additive_config(), "plot")

    def test_top_level_must_be_object(self):
        with pytest.raises(ConfigError, match="top level"):
            sweep.parse_config([1, 2], "sweep")

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown field"):
            sweep.parse_config(additive_config(color="red"), "sweep")

    def test_model_required(self):
        data = additive_config()
        del data["model"]
        with pytest.raises(ConfigError, match="model: required"):
            sweep.parse_config(data, "sweep")

    def test_time_required(self):
        data = additive_config()
        del data["time"]
        with pytest.raises(ConfigError, match="time: required"):
            sweep.parse_config(data, "sweep")

    def test_time_must_be_a_number(self):
        with pytest.raises(ConfigError, match="time: expected a real number"):
            sweep.parse_config(additive_config(time="soon"), "sweep")

    def test_booleans_are_not_numbers(self):
        with pytest.raises(ConfigError, match="time"):
            sweep.parse_config(additive_config(time=True), "sweep")

    def test_unknown_model_kind(self):
        data = additive_config(model={"kind": "ising"})
        with pytest.raises(ConfigError, match="model.kind"):
            sweep.parse_config(data, "sweep")

    def test_model_validation_error_is_config_error(self):
        data = additive_config(model={"kind": "nonreciprocal", "delta": 0.0})
        with pytest.raises(ConfigError, match="model: "):
            sweep.parse_config(data, "sweep")

    def test_unknown_model_field(self):
        data = additive_config(model={"kind": "pt", "radius": 1.0})
        with pytest.raises(ConfigError, match="model.radius"):
            sweep.parse_config(data, "sweep")

    def test_gauge_values(self):
        with pytest.raises(ConfigError, match="gauge: expected one of"):
            sweep.parse_config(additive_config(gauge="entry22"), "sweep")

    def test_probe_dimension_checked(self):
        with pytest.raises(ConfigError, match="probe: dimension"):
            sweep.parse_config(additive_config(probe=[1.0, 0.0, 0.0]), "sweep")

    def test_probe_zero_vector_rejected(self):
        with pytest.raises(ConfigError, match="zero vector"):
            sweep.parse_config(additive_config(probe=[0.0, 0.0]), "sweep")

    def test_probe_unknown_keyword(self):
        with pytest.raises(ConfigError, match="probe"):
            sweep.parse_config(additive_config(probe="excited"), "sweep")

    def test_probe_pair_form_decodes(self):
        cfg = sweep.parse_config(
            additive_config(probe=[[0.0, -1.0], [1.0, 0.0]]), "sweep"
        )
        assert cfg.probe == (complex(0.0, -1.0), complex(1.0, 0.0))

    def test_probe_entry_validation(self):
        with pytest.raises(ConfigError, match=r"probe\[1\]"):
            sweep.parse_config(additive_config(probe=[1.0, "x"]), "sweep")

    def test_fd_order_validated(self):
        with pytest.raises(ConfigError, match="fd"):
            sweep.parse_config(additive_config(fd={"order": 3}), "sweep")

    def test_fd_richardson_must_be_bool(self):
        with pytest.raises(ConfigError, match="fd.richardson"):
            sweep.parse_config(additive_config(fd={"richardson": 1}), "sweep")

    def test_outputs_names_must_be_strings(self):
        with pytest.raises(ConfigError, match="outputs.csv"):
            sweep.parse_config(additive_config(outputs={"csv": 5}), "sweep")

    def test_sweep_needs_grid_fields(self):
        data = additive_config()
        del data["theta_points"]
        with pytest.raises(ConfigError, match="theta_points: required"):
            sweep.parse_config(data, "sweep")

    def test_grid_needs_two_points(self):
        with pytest.raises(ConfigError, match="at least 2"):
            sweep.parse_config(additive_config(theta_points=1), "sweep")

    def test_grid_ordering(self):
        with pytest.raises(ConfigError, match="less than theta_max"):
            sweep.parse_config(
                additive_config(theta_min=1.0, theta_max=-0.4), "sweep"
            )

    def test_analyze_needs_theta(self):
        data = {"model": {"kind": "pt"}, "time": 1.0}
        with pytest.raises(ConfigError, match="theta: required"):
            sweep.parse_config(data, "analyze")

    def test_analyze_accepts_theta(self):
        data = {"model": {"kind": "pt"}, "time": 1.0, "theta": 0.3}
        cfg = sweep.parse_config(data, "analyze")
        assert cfg.theta == pytest.approx(0.3)

    def test_polynomial_model_parses(self):
        coeffs = [
            [[1.0, 0.0], [0.0, -1.0]],
            [[0.0, 1.0], [1.0, 0.0]],
        ]
        data = {
            "model": {"kind": "polynomial", "coefficients": coeffs},
            "time": 0.5,
            "theta": 0.1,
        }
        cfg = sweep.parse_config(data, "analyze")
        np.testing.assert_allclose(cfg.model.coefficients[1], [[0, 1], [1, 0]])

    def test_polynomial_rows_must_be_square(self):
        data = {
            "model": {"kind": "polynomial", "coefficients": [[[1.0, 0.0]]]},
            "time": 0.5,
            "theta": 0.1,
        }
        with pytest.raises(ConfigError, match="square"):
            sweep.parse_config(data, "analyze")


# --- presets -----------------------------------------------------------------------


@pytest.mark.parametrize("name", ["figure1a", "figure1b", "multiplicative", "pt-bound"])
def test_presets_parse(name):
    cfg = sweep.preset_config(name)
    assert cfg.theta_points >= 2
    assert cfg.outputs[0].endswith(".csv")
    assert cfg.outputs[1].endswith(".json")


def test_unknown_preset():
    with pytest.raises(ConfigError, match="figure1a"):
        sweep.preset_config("figure1c")


def test_pt_bound_preset_carries_fixed_probe():
    cfg = sweep.preset_config("pt-bound")
    assert cfg.probe != "ground"


# --- echo round-trip ----------------------------------------------------------------


@pytest.mark.parametrize("name", ["figure1a", "pt-bound", "multiplicative"])
def test_preset_echo_round_trip(name):
    cfg = sweep.preset_config(name)
    echo = sweep.config_echo(cfg, "sweep")
    again = sweep.parse_config(echo, "sweep")
    assert sweep.config_echo(again, "sweep") == echo


def test_custom_echo_round_trip():
    data = {
        "model": {"kind": "nonreciprocal", "parameterization": "raw", "k1": 4.0, "k2": 1.0},
        "time": 0.25,
        "theta": 0.0,
        "probe": [[0.5, 0.5], [0.5, -0.5]],
        "gauge": "raw",
        "fd": {"order": 4, "step": 1e-5, "richardson": True},
    }
    cfg = sweep.parse_config(data, "analyze")
    echo = sweep.config_echo(cfg, "analyze")
    again = sweep.parse_config(echo, "analyze")
    assert sweep.config_echo(again, "analyze") == echo
    assert echo["fd"] == {"order": 4, "step": 1e-5, "richardson": True}


def test_polynomial_echo_round_trip():
    data = {
        "model": {
            "kind": "polynomial",
            "coefficients": [[[0.0, 2.0], [0.5, 0.0]], [[0.0, 1.0], [1.0, 0.0]]],
        },
        "time": 0.5,
        "theta_min": 0.0,
        "theta_max": 1.0,
        "theta_points": 3,
    }
    cfg = sweep.parse_config(data, "sweep")
    echo = sweep.config_echo(cfg, "sweep")
    again = sweep.parse_config(echo, "sweep")
    assert sweep.config_echo(again, "sweep") == echo


# --- grids --------------------------------------------------------------------------


def test_grid_plain_linspace():
    cfg = sweep.parse_config(additive_config(theta_points=5), "sweep")
    grid = sweep.prepare_grid(cfg)
    np.testing.assert_allclose(grid.thetas, np.linspace(-0.4, 1.0, 5))
    assert grid.snapped == 0
    assert grid.excluded == 0


def test_grid_snaps_exceptional_point_inward():
    cfg = sweep.parse_config(
        additive_config(theta_min=-0.5, theta_max=1.0, theta_points=4), "sweep"
    )
    grid = sweep.prepare_grid(cfg)
    assert grid.snapped == 1
    assert grid.excluded == 0
    assert grid.thetas[0] == pytest.approx(-0.25)
    np.testing.assert_allclose(grid.thetas[1:], [0.0, 0.5, 1.0])


def test_grid_excludes_unmovable_point():
    """EP at the top edge whose inward snap lands on the other EP."""
    cfg = sweep.parse_config(
        additive_config(theta_min=-3.5, theta_max=-0.5, theta_points=2), "sweep"
    )
    grid = sweep.prepare_grid(cfg)
    assert grid.excluded == 1
    assert grid.snapped == 0
    np.testing.assert_allclose(grid.thetas, [-3.5])


# --- CSV rendering ------------------------------------------------------------------


def test_csv_header_exact():
    assert (
        sweep.CSV_HEADER
        == "theta,t,sqfi,cqfi,bound,term_rot,term_cross,k_diag,flags"
    )


def test_csv_seventeen_digit_floats():
    s = QfiSample(theta=1.0 / 3.0, time=1.0, sqfi_naive=0.1, cqfi=2.0, bound=3.0)
    text = sweep.render_csv([s])
    line = text.splitlines()[1]
    assert line.startswith("0.33333333333333331,1,0.10000000000000001,2,3")


def test_csv_failed_row_has_empty_numeric_cells():
    s = QfiSample(theta=0.5, time=2.0, flags=["EvalFailed"])
    text = sweep.render_csv([s])
    assert text.splitlines()[1] == "0.5,2,,,,,,,EvalFailed"


def test_csv_flag_order_is_canonical():
    s = QfiSample(
        theta=0.0,
        time=1.0,
        flags=["EvalFailed", "BoundSmallT", "NearEP", "TrackingDegenerate"],
    )
    line = sweep.render_csv([s]).splitlines()[1]
    assert line.endswith("NearEP;TrackingDegenerate;BoundSmallT;EvalFailed")


def test_csv_ends_with_newline():
    assert sweep.render_csv([]).endswith("\n")


# --- per-point engine ----------------------------------------------------------------


def test_evaluate_point_small_time_flag():
    cfg = sweep.parse_config(additive_config(time=1e-3), "sweep")
    from etaqfi import models

    system = models.build_system(cfg.model, cfg.gauge)
    sample = sweep.evaluate_point(system, 0.0, 1e-3, models.ground_probe(2))
    assert fisher.FLAG_BOUND_SMALL_T in sample.flags
    big = sweep.evaluate_point(system, 0.0, math.pi, models.ground_probe(2))
    assert fisher.FLAG_BOUND_SMALL_T not in big.flags


def test_effective_scheme_env_override(monkeypatch):
    monkeypatch.setenv("ETAQFI_FD_STEP", "5e-7")
    eff = sweep._effective_scheme(FdScheme())
    assert eff.step == pytest.approx(5e-7)
    explicit = sweep._effective_scheme(FdScheme(step=1e-4))
    assert explicit.step == pytest.approx(1e-4)


# --- sweep runs ----------------------------------------------------------------------


def test_run_sweep_clean_report():
    cfg = sweep.parse_config(additive_config(), "sweep")
    res = sweep.run_sweep(cfg)
    assert len(res.samples) == 8
    assert all(e is None for e in res.errors)
    summary = res.report["summary"]
    assert summary["points"] == 8
    assert summary["failed_points"] == 0
    assert summary["bound_violations"] == 0
    assert summary["duality_max_deviation"] <= 1e-6
    assert summary["max_cqfi"] > 0
    assert res.report["provenance"]["tool"] == "etaqfi"
    assert "flat-renormalized" in res.report["provenance"]["csv_sqfi_column"]
    assert res.csv_text.splitlines()[0] == sweep.CSV_HEADER
    assert len(res.csv_text.splitlines()) == 9


def test_run_sweep_broken_phase_rows_are_flagged():
    cfg = sweep.parse_config(
        additive_config(theta_min=-1.0, theta_max=0.2, theta_points=7), "sweep"
    )
    res = sweep.run_sweep(cfg)
    failed = [(s, e) for s, e in zip(res.samples, res.errors) if e is not None]
    assert len(failed) == 3
    for s, e in failed:
        assert s.flags == [sweep.FLAG_EVAL_FAILED]
        assert e.startswith("BrokenPhase")
    rows = res.report["rows"]
    bad = [r for r in rows if "error" in r]
    assert len(bad) == 3
    assert all(r["sqfi"] is None for r in bad)
    assert all(r["flags"] == ["EvalFailed"] for r in bad)
    assert res.report["summary"]["failed_points"] == 3


def test_run_sweep_is_deterministic_across_repeats():
    cfg = sweep.parse_config(additive_config(theta_points=6), "sweep")
    a = sweep.run_sweep(cfg)
    b = sweep.run_sweep(cfg)
    assert a.csv_text == b.csv_text


def test_run_sweep_worker_count_does_not_change_bytes():
    cfg = sweep.parse_config(additive_config(theta_points=10), "sweep")
    serial = sweep.run_sweep(cfg, workers=1)
    parallel = sweep.run_sweep(cfg, workers=2)
    assert serial.csv_text == parallel.csv_text
    assert serial.report["rows"] == parallel.report["rows"]


def test_run_sweep_snap_is_recorded_in_summary():
    cfg = sweep.parse_config(
        additive_config(theta_min=-0.5, theta_max=1.0, theta_points=4), "sweep"
    )
    res = sweep.run_sweep(cfg)
    assert res.report["summary"]["snapped_points"] == 1
    assert res.report["summary"]["excluded_points"] == 0


# --- analyze runs --------------------------------------------------------------------


def test_run_analyze_structure():
    data = {
        "model": {"kind": "nonreciprocal", "delta": 0.5},
        "time": math.pi,
        "theta": 0.0,
        "gauge": "closed-form",
    }
    cfg = sweep.parse_config(data, "analyze")
    out = sweep.run_analyze(cfg)
    assert set(out) == {"spec", "sample", "metric", "provenance"}
    assert out["sample"]["theta"] == 0.0
    assert out["sample"]["cqfi"] == pytest.approx(6.25 * math.pi**2, rel=1e-6)
    assert out["sample"]["sqfi_naive"] == pytest.approx(1.5625 * math.pi**2, rel=1e-6)
    assert out["metric"]["posdef"] is True
    assert out["metric"]["gauge"] == "closed-form"
    assert out["metric"]["condition"] == pytest.approx(4.0)
    assert out["spec"]["theta"] == 0.0


def test_run_analyze_propagates_phase_errors():
    data = {
        "model": {"kind": "nonreciprocal", "delta": 0.5},
        "time": 1.0,
        "theta": -1.0,
    }
    cfg = sweep.parse_config(data, "analyze")
    with pytest.raises(BrokenPhase):
        sweep.run_analyze(cfg)
