"""Sweep jobs: config parsing, theta grids, the per-point engine, CSV and report.

A job evolves a fixed probe under H(theta) for a fixed time at each grid
point and reports flat, covariant, and mapped Fisher information together
with the generator bound. The CSV sqfi column carries the flat QFI of the
flat-renormalized un-mapped state curve (the quantity that stays bounded at
an exceptional point); JSON rows carry both that value (sqfi_naive) and the
mapped Hermitian-side value (sqfi) that closes the decomposition identity.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import fisher, geometry, metric, models
from .errors import AtExceptionalPoint, ConfigError, EtaqfiError
from .fisher import QfiSample
from .geometry import FdScheme, ParamCurve, cached, default_scheme

CSV_HEADER = "theta,t,sqfi,cqfi,bound,term_rot,term_cross,k_diag,flags"

FLAG_EVAL_FAILED = "EvalFailed"
_FLAG_ORDER = (
    fisher.FLAG_NEAR_EP,
    fisher.FLAG_TRACKING_DEGENERATE,
    fisher.FLAG_BOUND_SMALL_T,
    FLAG_EVAL_FAILED,
)

_BOUND_VIOLATION_RTOL = 1e-6
_BOUND_VIOLATION_ATOL = 1e-9


# --- config parsing -----------------------------------------------------------


@dataclass
class SweepConfig:
    """Validated job description (single theta for analyze, grid for sweep)."""

    model: object
    time: float
    theta: Optional[float] = None
    theta_min: Optional[float] = None
    theta_max: Optional[float] = None
    theta_points: Optional[int] = None
    probe: object = "ground"  # "ground" or tuple of complex amplitudes
    gauge: str = "closed-form"
    fd: FdScheme = field(default_factory=FdScheme)
    outputs: Tuple[Optional[str], Optional[str]] = (None, None)  # (csv, report)


def _real(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a real number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return v


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _entry(value, where: str) -> complex:
    """One scalar: a plain number or an [re, im] pair."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(float(value), 0.0)
    if (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
    ):
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _matrix(value, where: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{where}: expected a nonempty list of rows")
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, (list, tuple)) or not row:
            raise ConfigError(f"{where}[{i}]: expected a nonempty row")
        rows.append([_entry(x, f"{where}[{i}][{j}]") for j, x in enumerate(row)])
    width = {len(r) for r in rows}
    if len(width) != 1 or width.pop() != len(rows):
        raise ConfigError(f"{where}: rows must form a square matrix")
    return np.asarray(rows, dtype=np.complex128)


def _check_keys(data: dict, allowed, where: str) -> None:
    for k in data:
        if k not in allowed:
            raise ConfigError(f"{where}{k}: unknown field")


def _parse_model(value):
    if not isinstance(value, dict):
        raise ConfigError("model: expected an object")
    kind = value.get("kind")
    try:
        if kind == "nonreciprocal":
            _check_keys(value, {"kind", "omega", "delta", "parameterization", "k1", "k2"}, "model.")
            kw = {}
            if "omega" in value:
                kw["omega"] = _real(value["omega"], "model.omega")
            if "delta" in value:
                kw["delta"] = _real(value["delta"], "model.delta")
            if "parameterization" in value:
                kw["parameterization"] = value["parameterization"]
            for key in ("k1", "k2"):
                if key in value and value[key] is not None:
                    kw[key] = _real(value[key], f"model.{key}")
            return models.NonreciprocalModel(**kw)
        if kind == "pt":
            _check_keys(value, {"kind", "r", "phi", "s"}, "model.")
            kw = {k: _real(value[k], f"model.{k}") for k in ("r", "phi", "s") if k in value}
            return models.PtModel(**kw)
        if kind == "polynomial":
            _check_keys(value, {"kind", "coefficients"}, "model.")
            coeffs = value.get("coefficients")
            if not isinstance(coeffs, (list, tuple)) or not coeffs:
                raise ConfigError("model.coefficients: expected a nonempty list of matrices")
            mats = tuple(
                _matrix(c, f"model.coefficients[{n}]") for n, c in enumerate(coeffs)
            )
            return models.PolynomialModel(coefficients=mats)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    raise ConfigError(
        f"model.kind: expected nonreciprocal, pt, or polynomial, got {kind!r}"
    )


def _parse_fd(value) -> FdScheme:
    if value is None:
        return FdScheme()
    if not isinstance(value, dict):
        raise ConfigError("fd: expected an object")
    _check_keys(value, {"order", "step", "richardson"}, "fd.")
    order = _integer(value.get("order", 2), "fd.order")
    step = value.get("step")
    if step is not None:
        step = _real(step, "fd.step")
    richardson = value.get("richardson", False)
    if not isinstance(richardson, bool):
        raise ConfigError(f"fd.richardson: expected true or false, got {richardson!r}")
    try:
        return FdScheme(order=order, step=step, richardson=richardson)
    except ValueError as exc:
        raise ConfigError(f"fd: {exc}") from exc


def _parse_probe(value, dim: int):
    if value is None or value == "ground":
        return "ground"
    if isinstance(value, str):
        raise ConfigError(f"probe: expected \"ground\" or a complex vector, got {value!r}")
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("probe: expected \"ground\" or a nonempty list of entries")
    amps = tuple(_entry(x, f"probe[{i}]") for i, x in enumerate(value))
    if len(amps) != dim:
        raise ConfigError(
            f"probe: dimension {len(amps)} does not match model dimension {dim}"
        )
    if all(a == 0 for a in amps):
        raise ConfigError("probe: must not be the zero vector")
    return amps


def _parse_outputs(value) -> Tuple[Optional[str], Optional[str]]:
    if value is None:
        return (None, None)
    if not isinstance(value, dict):
        raise ConfigError("outputs: expected an object")
    _check_keys(value, {"csv", "report"}, "outputs.")
    out = []
    for key in ("csv", "report"):
        v = value.get(key)
        if v is not None and not isinstance(v, str):
            raise ConfigError(f"outputs.{key}: expected a file name string")
        out.append(v)
    return (out[0], out[1])


def parse_config(data, mode: str) -> SweepConfig:
    """Validate a job dict; mode is 'analyze' (single theta) or 'sweep' (grid)."""
    if mode not in ("analyze", "sweep"):
        raise ValueError(f"mode must be 'analyze' or 'sweep', got {mode!r}")
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    allowed = {"model", "time", "probe", "gauge", "fd", "outputs"}
    allowed |= {"theta"} if mode == "analyze" else {"theta_min", "theta_max", "theta_points"}
    _check_keys(data, allowed, "")

    if "model" not in data:
        raise ConfigError("model: required")
    model = _parse_model(data["model"])
    if "time" not in data:
        raise ConfigError("time: required")
    time = _real(data["time"], "time")

    gauge = data.get("gauge", "closed-form")
    if gauge not in metric.GAUGES:
        raise ConfigError(f"gauge: expected one of {', '.join(metric.GAUGES)}, got {gauge!r}")

    dim = model.dim if isinstance(model, models.PolynomialModel) else 2
    probe = _parse_probe(data.get("probe"), dim)
    fd = _parse_fd(data.get("fd"))
    outputs = _parse_outputs(data.get("outputs"))

    cfg = SweepConfig(
        model=model, time=time, probe=probe, gauge=gauge, fd=fd, outputs=outputs
    )
    if mode == "analyze":
        if "theta" not in data:
            raise ConfigError("theta: required")
        cfg.theta = _real(data["theta"], "theta")
    else:
        for key in ("theta_min", "theta_max", "theta_points"):
            if key not in data:
                raise ConfigError(f"{key}: required")
        cfg.theta_min = _real(data["theta_min"], "theta_min")
        cfg.theta_max = _real(data["theta_max"], "theta_max")
        cfg.theta_points = _integer(data["theta_points"], "theta_points")
        if cfg.theta_points < 2:
            raise ConfigError("theta_points: must be at least 2")
        if not cfg.theta_min < cfg.theta_max:
            raise ConfigError("theta_min: must be less than theta_max")
    return cfg


# --- echo (report round-trip) -------------------------------------------------


def _pair(z: complex) -> list:
    return [float(z.real), float(z.imag)]


def _matrix_pairs(m: np.ndarray) -> list:
    return [[_pair(complex(x)) for x in row] for row in np.asarray(m)]


def _model_echo(model) -> dict:
    if isinstance(model, models.NonreciprocalModel):
        out = {
            "kind": "nonreciprocal",
            "omega": model.omega,
            "delta": model.delta,
            "parameterization": model.parameterization,
        }
        if model.parameterization == "raw":
            out["k1"] = model.k1
            out["k2"] = model.k2
        return out
    if isinstance(model, models.PtModel):
        return {"kind": "pt", "r": model.r, "phi": model.phi, "s": model.s}
    if isinstance(model, models.PolynomialModel):
        return {
            "kind": "polynomial",
            "coefficients": [_matrix_pairs(c) for c in model.coefficients],
        }
    raise TypeError(f"unsupported model type {type(model).__name__}")


def config_echo(cfg: SweepConfig, mode: str) -> dict:
    out = {"model": _model_echo(cfg.model), "time": cfg.time}
    if mode == "analyze":
        out["theta"] = cfg.theta
    else:
        out["theta_min"] = cfg.theta_min
        out["theta_max"] = cfg.theta_max
        out["theta_points"] = cfg.theta_points
    out["probe"] = "ground" if cfg.probe == "ground" else [_pair(a) for a in cfg.probe]
    out["gauge"] = cfg.gauge
    out["fd"] = {"order": cfg.fd.order, "step": cfg.fd.step, "richardson": cfg.fd.richardson}
    if cfg.outputs != (None, None):
        out["outputs"] = {"csv": cfg.outputs[0], "report": cfg.outputs[1]}
    return out


# --- presets ------------------------------------------------------------------

PRESETS = {
    "figure1a": {
        "model": {
            "kind": "nonreciprocal",
            "omega": 0.0,
            "delta": 0.5,
            "parameterization": "additive",
        },
        "theta_min": -0.499,
        "theta_max": 1.0,
        "theta_points": 3000,
        "time": math.pi,
        "probe": "ground",
        "gauge": "closed-form",
        "outputs": {"csv": "figure1a.csv", "report": "figure1a.json"},
    },
    "figure1b": {
        "model": {
            "kind": "nonreciprocal",
            "omega": 0.0,
            "delta": 0.2,
            "parameterization": "additive",
        },
        "theta_min": -0.199,
        "theta_max": 1.0,
        "theta_points": 3000,
        "time": math.pi,
        "probe": "ground",
        "gauge": "closed-form",
        "outputs": {"csv": "figure1b.csv", "report": "figure1b.json"},
    },
    "multiplicative": {
        "model": {
            "kind": "nonreciprocal",
            "omega": 0.0,
            "delta": 0.5,
            "parameterization": "multiplicative",
        },
        "theta_min": 0.1,
        "theta_max": 2.0,
        "theta_points": 100,
        "time": 0.001,
        "probe": "ground",
        "gauge": "closed-form",
        "outputs": {"csv": "multiplicative.csv", "report": "multiplicative.json"},
    },
    "pt-bound": {
        "model": {"kind": "pt", "r": 1.0, "phi": math.pi / 2, "s": 2.0},
        "theta_min": 0.0,
        "theta_max": 1.0,
        "theta_points": 51,
        "time": 0.001,
        # Width-saturating probe: equal superposition of the generator's extreme
        # eigenvectors pulled back through S at theta=0.  Its image stays pinned
        # to the same direction along the whole sweep, so the cqfi column traces
        # the closed-form bound exactly.  The ground probe would instead pick up
        # an O(1) metric-drift contribution that dwarfs the small-t bound.
        "probe": [[0.0, -1.0], [1.0, 0.0]],
        "gauge": "closed-form",
        "outputs": {"csv": "pt-bound.csv", "report": "pt-bound.json"},
    },
}


def preset_config(name: str) -> SweepConfig:
    if name not in PRESETS:
        raise ConfigError(
            f"preset: unknown name {name!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return parse_config(PRESETS[name], "sweep")


# --- per-point engine ---------------------------------------------------------


def _effective_scheme(fd: FdScheme) -> FdScheme:
    """Fill an unset step from the environment override, if present."""
    if fd.step is not None:
        return fd
    env = default_scheme()
    if env.step is None:
        return fd
    return FdScheme(order=fd.order, step=env.step, richardson=fd.richardson)


def _probe_amps(cfg: SweepConfig, dim: int) -> np.ndarray:
    if cfg.probe == "ground":
        return models.ground_probe(dim)
    return np.asarray(cfg.probe, dtype=np.complex128)


def evaluate_point(
    system: models.ParameterizedSystem,
    theta: float,
    time: float,
    amps: np.ndarray,
    scheme: Optional[FdScheme] = None,
) -> QfiSample:
    """All QFI quantities at one theta for a fixed probe and evolution time."""
    theta = float(theta)
    system.h(theta)  # surface BrokenPhase/AtExceptionalPoint before any wrapping
    eta_c = cached(system.eta)
    raw = cached(ParamCurve(lambda th: fisher.evolve(system.h(th), amps, time)))
    tracked = geometry.track_eigenbasis(eta_c, np.array([theta]), scheme)
    sample = fisher.decompose_fh(raw, eta_c, tracked, theta, scheme, time=time)
    sample.bound = float(fisher.qfi_bound(system.hh, theta, time, scheme))
    if time <= fisher.SMALL_T_CUTOFF:
        sample.flags.append(fisher.FLAG_BOUND_SMALL_T)
    return sample


def _failed_sample(theta: float, time: float) -> QfiSample:
    return QfiSample(theta=float(theta), time=float(time), flags=[FLAG_EVAL_FAILED])


def _eval_one(system, theta, time, amps, scheme):
    try:
        return evaluate_point(system, theta, time, amps, scheme), None
    except (EtaqfiError, ValueError) as exc:
        return _failed_sample(theta, time), f"{type(exc).__name__}: {exc}"


def _worker_chunk(payload):
    echo, thetas = payload
    cfg = parse_config(echo, "sweep")
    system = models.build_system(cfg.model, cfg.gauge)
    amps = _probe_amps(cfg, system.dim)
    scheme = _effective_scheme(cfg.fd)
    return [_eval_one(system, th, cfg.time, amps, scheme) for th in thetas]


# --- grids --------------------------------------------------------------------


@dataclass
class PreparedGrid:
    thetas: List[float]
    snapped: int
    excluded: int


def prepare_grid(cfg: SweepConfig) -> PreparedGrid:
    """Linspace grid with points at an exceptional point snapped half a step.

    A point where the model is exactly at an exceptional point moves half a
    grid step toward the grid's interior (or away if that also fails); points
    that cannot be moved are excluded and counted.
    """
    system = models.build_system(cfg.model, cfg.gauge)

    def ok(th: float) -> bool:
        try:
            system.h(float(th))
            return True
        except AtExceptionalPoint:
            return False
        except (EtaqfiError, ValueError):
            return True  # not an EP hit; handled per point later

    base = np.linspace(cfg.theta_min, cfg.theta_max, cfg.theta_points)
    step = (cfg.theta_max - cfg.theta_min) / (cfg.theta_points - 1)
    center = 0.5 * (cfg.theta_min + cfg.theta_max)
    thetas: List[float] = []
    snapped = 0
    excluded = 0
    for th in base:
        th = float(th)
        if ok(th):
            thetas.append(th)
            continue
        direction = 1.0 if th <= center else -1.0
        moved = False
        for cand in (th + 0.5 * step * direction, th - 0.5 * step * direction):
            if cfg.theta_min <= cand <= cfg.theta_max and ok(cand):
                thetas.append(float(cand))
                snapped += 1
                moved = True
                break
        if not moved:
            excluded += 1
    return PreparedGrid(thetas=thetas, snapped=snapped, excluded=excluded)


# --- output rendering ---------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    xf = float(x)
    if not math.isfinite(xf):
        return ""
    return f"{xf:.17g}"


def _flags_cell(flags: Sequence[str]) -> str:
    ordered = [f for f in _FLAG_ORDER if f in flags]
    ordered += [f for f in flags if f not in _FLAG_ORDER]
    return ";".join(ordered)


def render_csv(samples: Sequence[QfiSample]) -> str:
    lines = [CSV_HEADER]
    for s in samples:
        lines.append(
            ",".join(
                [
                    _num(s.theta),
                    _num(s.time),
                    _num(s.sqfi_naive),
                    _num(s.cqfi),
                    _num(s.bound),
                    _num(s.term_metric_rotation),
                    _num(s.term_cross),
                    _num(s.k_diag),
                    _flags_cell(s.flags),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _finite_or_none(x: float):
    xf = float(x)
    return xf if math.isfinite(xf) else None


def sample_row(sample: QfiSample, error: Optional[str] = None) -> dict:
    row = {
        "theta": sample.theta,
        "t": _finite_or_none(sample.time),
        "sqfi": _finite_or_none(sample.sqfi),
        "sqfi_naive": _finite_or_none(sample.sqfi_naive),
        "cqfi": _finite_or_none(sample.cqfi),
        "bound": _finite_or_none(sample.bound),
        "term_rot": _finite_or_none(sample.term_metric_rotation),
        "term_cross": _finite_or_none(sample.term_cross),
        "k_diag": sample.k_diag,
        "flags": list(_flags_cell(sample.flags).split(";")) if sample.flags else [],
    }
    if error is not None:
        row["error"] = error
    return row


def _provenance(cfg: SweepConfig) -> dict:
    from . import __version__

    fd = _effective_scheme(cfg.fd)
    return {
        "tool": "etaqfi",
        "version": __version__,
        "gauge": cfg.gauge,
        "fd": {"order": fd.order, "step": fd.step, "richardson": fd.richardson},
        "csv_sqfi_column": "flat QFI of the flat-renormalized un-mapped state curve",
    }


def _summary(samples: Sequence[QfiSample], errors, grid: PreparedGrid) -> dict:
    finite = [s for s in samples if math.isfinite(s.cqfi)]
    best = max(finite, key=lambda s: s.cqfi) if finite else None
    clean = [
        s
        for s in samples
        if fisher.FLAG_NEAR_EP not in s.flags
        and FLAG_EVAL_FAILED not in s.flags
        and math.isfinite(s.sqfi)
        and math.isfinite(s.cqfi)
    ]
    duality = 0.0
    for s in clean:
        duality = max(duality, abs(s.sqfi - s.cqfi) / max(1.0, abs(s.sqfi)))
    violations = sum(
        1
        for s in clean
        if math.isfinite(s.bound)
        and s.cqfi > s.bound * (1.0 + _BOUND_VIOLATION_RTOL) + _BOUND_VIOLATION_ATOL
    )
    return {
        "points": len(samples),
        "max_cqfi": None if best is None else best.cqfi,
        "argmax_theta": None if best is None else best.theta,
        "duality_max_deviation": duality if clean else None,
        "bound_violations": violations,
        "failed_points": sum(1 for e in errors if e is not None),
        "snapped_points": grid.snapped,
        "excluded_points": grid.excluded,
    }


# --- runners ------------------------------------------------------------------


@dataclass
class SweepResult:
    samples: List[QfiSample]
    errors: List[Optional[str]]
    csv_text: str
    report: dict
    grid: PreparedGrid


def run_sweep(cfg: SweepConfig, workers: int = 1) -> SweepResult:
    grid = prepare_grid(cfg)
    echo = config_echo(cfg, "sweep")
    if workers <= 1 or len(grid.thetas) <= 1:
        results = _worker_chunk((echo, grid.thetas))
    else:
        chunks = [list(c) for c in np.array_split(grid.thetas, workers) if len(c)]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            results = [r for part in pool.map(_worker_chunk, [(echo, c) for c in chunks]) for r in part]
    samples = [r[0] for r in results]
    errors = [r[1] for r in results]
    report = {
        "spec": echo,
        "rows": [sample_row(s, e) for s, e in zip(samples, errors)],
        "summary": _summary(samples, errors, grid),
        "provenance": _provenance(cfg),
    }
    return SweepResult(
        samples=samples, errors=errors, csv_text=render_csv(samples), report=report, grid=grid
    )


def _bundle_json(bundle: metric.MetricBundle) -> dict:
    return {
        "eta": _matrix_pairs(bundle.eta),
        "basis": _matrix_pairs(bundle.basis),
        "lam": [float(x) for x in bundle.lam],
        "s": _matrix_pairs(bundle.s),
        "residual_ph": float(bundle.residual_ph),
        "posdef": bool(bundle.posdef),
        "gauge": bundle.gauge,
        "condition": float(bundle.condition),
    }


def run_analyze(cfg: SweepConfig) -> dict:
    """Single-theta job: one sample plus the full metric diagnostics.

    Model-phase errors (broken phase, exceptional point) propagate to the
    caller instead of being folded into a flagged row.
    """
    system = models.build_system(cfg.model, cfg.gauge)
    amps = _probe_amps(cfg, system.dim)
    scheme = _effective_scheme(cfg.fd)
    sample = evaluate_point(system, cfg.theta, cfg.time, amps, scheme)
    bundle = system.bundle_of(cfg.theta)
    return {
        "spec": config_echo(cfg, "analyze"),
        "sample": sample_row(sample),
        "metric": _bundle_json(bundle),
        "provenance": _provenance(cfg),
    }
