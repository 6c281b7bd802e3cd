"""Self-check suite behind `etaqfi verify`.

Each named check exercises one documented invariant through the public
module surface (so a deliberately broken function is caught by the matching
check, not hidden behind a cached import). The fast level keeps every sweep
at 50 grid points or fewer; the full level adds the figure presets, denser
grids, and worker-pool determinism.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from . import fisher, geometry, linalg, metric, models, sweep
from .errors import AtExceptionalPoint, BrokenPhase
from .geometry import ParamCurve, cached
from .linalg import dagger, fro

# --- fixtures -----------------------------------------------------------------


@dataclass
class VerifyContext:
    rng: np.random.Generator
    full: bool


def _rand_complex(rng, n: int) -> np.ndarray:
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def _rand_hermitian(rng, n: int) -> np.ndarray:
    a = _rand_complex(rng, n)
    return 0.5 * (a + dagger(a))


def _rand_unitary(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(_rand_complex(rng, n))
    d = np.diag(r)
    return q * (d / np.abs(d))


def _rand_pseudo_hermitian(rng, n: int) -> np.ndarray:
    """P diag(real) P^-1 with well-separated eigenvalues and mild conditioning."""
    while True:
        p = _rand_complex(rng, n)
        if np.linalg.cond(p) > 50.0:
            continue
        vals = np.sort(rng.uniform(-2.0, 2.0, n))[::-1]
        if n > 1 and np.min(-np.diff(vals)) < 0.15:
            continue
        return p @ np.diag(vals.astype(np.complex128)) @ linalg.inverse(p)


def _rotating_eta_curve() -> ParamCurve:
    d = np.diag([2.0, 1.0]).astype(np.complex128)

    def ev(th):
        c, s = math.cos(th), math.sin(th)
        r = np.array([[c, -s], [s, c]], dtype=np.complex128)
        return r @ d @ r.T

    return ParamCurve(ev)


def _rotating_psi_curve() -> ParamCurve:
    def ev(th):
        return np.array(
            [math.cos(0.7 * th), np.exp(1j * th) * math.sin(0.7 * th)],
            dtype=np.complex128,
        )

    return ParamCurve(ev)


def _evolved_raw_curve(system: models.ParameterizedSystem, t: float) -> ParamCurve:
    amps = models.ground_probe(system.dim)
    return cached(ParamCurve(lambda th: fisher.evolve(system.h(th), amps, t)))


_ADDITIVE = {"kind": "nonreciprocal", "omega": 0.0, "delta": 0.5, "parameterization": "additive"}
_MULTIPLICATIVE = {
    "kind": "nonreciprocal",
    "omega": 0.0,
    "delta": 0.5,
    "parameterization": "multiplicative",
}
_PT = {"kind": "pt", "r": 1.0, "phi": math.pi / 2, "s": 2.0}


def _sweep_cfg(model: dict, lo: float, hi: float, n: int, t: float, probe="ground") -> sweep.SweepConfig:
    return sweep.parse_config(
        {
            "model": model,
            "theta_min": lo,
            "theta_max": hi,
            "theta_points": n,
            "time": t,
            "probe": probe,
        },
        "sweep",
    )


def _clean(samples):
    return [
        s
        for s in samples
        if fisher.FLAG_NEAR_EP not in s.flags
        and sweep.FLAG_EVAL_FAILED not in s.flags
        and math.isfinite(s.sqfi)
        and math.isfinite(s.cqfi)
    ]


# --- registry -----------------------------------------------------------------

_CHECKS: List[Tuple[str, bool, Callable[[VerifyContext], None]]] = []


def _check(name: str, full_only: bool = False):
    def deco(fn):
        _CHECKS.append((name, full_only, fn))
        return fn

    return deco


def check_names() -> List[str]:
    return [name for name, _, _ in _CHECKS]


# --- dense linear algebra -----------------------------------------------------


@_check("eig-reconstruction")
def _eig_reconstruction(ctx: VerifyContext) -> None:
    target = 200 if ctx.full else 40
    done = 0
    while done < target:
        dim = int(ctx.rng.integers(2, 9))
        m = _rand_complex(ctx.rng, dim)
        es = linalg.eig_general(m)
        if es.vector_condition >= 1e6:
            continue
        rec = es.right_vectors @ np.diag(es.values) @ linalg.inverse(es.right_vectors)
        res = fro(m - rec)
        assert res <= 1e-9 * fro(m), f"residual {res:.3e} on case {done} (dim {dim})"
        done += 1


@_check("hermitian-basis-unitarity")
def _hermitian_unitarity(ctx: VerifyContext) -> None:
    eye_defect = 0.0
    for _ in range(20):
        dim = int(ctx.rng.integers(2, 9))
        he = linalg.eig_hermitian(_rand_hermitian(ctx.rng, dim))
        eye_defect = max(eye_defect, fro(dagger(he.basis) @ he.basis - np.eye(dim)))
    assert eye_defect <= 1e-12, f"basis unitarity defect {eye_defect:.3e}"


@_check("expm-group")
def _expm_group(ctx: VerifyContext) -> None:
    for case in range(10):
        dim = int(ctx.rng.integers(2, 7))
        m = _rand_complex(ctx.rng, dim)
        m *= 5.0 / fro(m)
        t1, t2 = ctx.rng.uniform(-0.5, 0.5, 2)
        lhs = linalg.expm(m * (t1 + t2))
        rhs = linalg.expm(m * t1) @ linalg.expm(m * t2)
        res = fro(lhs - rhs)
        assert res <= 1e-10 * max(1.0, fro(lhs)), f"group defect {res:.3e} on case {case}"


@_check("expm-closed-form")
def _expm_closed_form(ctx: VerifyContext) -> None:
    model = models.NonreciprocalModel(delta=0.5)
    for theta in (0.0, 0.3):
        k1, k2 = model.couplings(theta)
        sl = models.nonreciprocal(model, theta)
        big = math.sqrt(k1 * k2)
        for t in (0.5, math.pi):
            state = fisher.evolve(sl.h, models.ground_probe(2), t)
            ref = np.array(
                [math.cos(big * t), -1j * math.sqrt(k2 / k1) * math.sin(big * t)],
                dtype=np.complex128,
            )
            err = float(np.linalg.norm(state - ref))
            assert err <= 1e-12, f"evolved state off closed form by {err:.3e} at theta={theta}, t={t}"


@_check("generator-hermiticity")
def _generator_hermiticity(ctx: VerifyContext) -> None:
    step = 1e-5
    for _ in range(5):
        dim = int(ctx.rng.integers(2, 6))
        g1 = _rand_hermitian(ctx.rng, dim)
        g2 = _rand_hermitian(ctx.rng, dim)

        def v_of(th):
            return linalg.expm(-1j * th * g1) @ linalg.expm(-1j * th * th * g2)

        th0 = 0.4
        dv = (v_of(th0 + step) - v_of(th0 - step)) / (2.0 * step)
        h = 1j * v_of(th0) @ dagger(dv)
        asym = fro(h - dagger(h))
        assert asym <= 1e-6, f"generator asymmetry {asym:.3e}"


# --- metric construction ------------------------------------------------------


@_check("gauge-congruence")
def _gauge_congruence(ctx: VerifyContext) -> None:
    for case in range(8):
        dim = int(ctx.rng.integers(2, 6))
        h = _rand_pseudo_hermitian(ctx.rng, dim)
        etas = []
        for gauge in metric.GAUGES:
            b = metric.metric_bundle(h, gauge)
            res = metric.check_pseudo_hermiticity(h, b.eta)
            assert res <= 1e-10, f"pseudo-Hermiticity residual {res:.3e} (gauge {gauge}, case {case})"
            etas.append(b.eta)
        ref = etas[0]
        mask = np.abs(ref) > 1e-8 * fro(ref)
        for other in etas[1:]:
            ratio = other[mask] / ref[mask]
            mean = complex(np.mean(ratio))
            assert mean.real > 0 and abs(mean.imag) <= 1e-10 * abs(mean), "scale not positive"
            spread = float(np.max(np.abs(ratio - mean)))
            assert spread <= 1e-9 * abs(mean), f"gauges differ beyond a scalar ({spread:.3e})"


@_check("counterpart-spectrum")
def _counterpart_spectrum(ctx: VerifyContext) -> None:
    for case in range(8):
        dim = int(ctx.rng.integers(2, 6))
        h = _rand_pseudo_hermitian(ctx.rng, dim)
        b = metric.metric_bundle(h, "raw")
        hh = metric.hermitian_counterpart(h, b.s)
        lhs = np.sort(linalg.eig_hermitian(hh).values)
        rhs = np.sort(linalg.eig_general(h).values.real)
        err = float(np.max(np.abs(lhs - rhs)))
        assert err <= 1e-9 * max(1.0, fro(h)), f"spectrum mismatch {err:.3e} on case {case}"


@_check("factor-freedom")
def _factor_freedom(ctx: VerifyContext) -> None:
    for _ in range(6):
        dim = int(ctx.rng.integers(2, 6))
        h = _rand_pseudo_hermitian(ctx.rng, dim)
        b = metric.metric_bundle(h, "raw")
        hh = metric.hermitian_counterpart(h, b.s)
        t = _rand_unitary(ctx.rng, dim)
        ts = t @ b.s
        eta2 = dagger(ts) @ ts
        assert fro(eta2 - b.eta) <= 1e-12 * max(1.0, fro(b.eta)), "eta moved under S -> T S"
        hh2 = metric.hermitian_counterpart(h, ts)
        err = fro(hh2 - t @ hh @ dagger(t))
        assert err <= 1e-9 * max(1.0, fro(hh)), f"counterpart not conjugated ({err:.3e})"


@_check("counterpart-round-trip")
def _counterpart_round_trip(ctx: VerifyContext) -> None:
    for _ in range(6):
        dim = int(ctx.rng.integers(2, 6))
        h = _rand_pseudo_hermitian(ctx.rng, dim)
        b = metric.metric_bundle(h, "entry11")
        hh = metric.hermitian_counterpart(h, b.s)
        back = linalg.solve(b.s, hh @ b.s)
        err = fro(back - h)
        assert err <= 1e-10 * max(1.0, fro(h)), f"round trip defect {err:.3e}"


# --- geometry -----------------------------------------------------------------


@_check("connection-compatibility")
def _connection_compat(ctx: VerifyContext) -> None:
    curves = [_rotating_eta_curve(), models.build_system(models.NonreciprocalModel(delta=0.5)).eta]
    for curve in curves:
        c = cached(curve)
        for th in (0.1, 0.3):
            gamma, _ = geometry.connection(c, th)
            eta = np.asarray(c(th))
            deta = geometry.d_theta(ParamCurve(lambda x: np.asarray(c(x))), th)
            defect = fro(deta - eta @ gamma - dagger(gamma) @ eta)
            assert defect <= 1e-6 * fro(deta) + 1e-10, f"compatibility defect {defect:.3e} at theta={th}"


@_check("norm-transport")
def _norm_transport(ctx: VerifyContext) -> None:
    eta_c = cached(_rotating_eta_curve())
    psi = fisher.eta_normalized_curve(_rotating_psi_curve(), eta_c)
    worst = 0.0
    for th in (0.15, 0.3, 0.45):
        cov, _ = geometry.covariant_derivative(psi, eta_c, th)
        eta = np.asarray(eta_c(th))
        val = abs(2.0 * geometry.eta_inner(cov, eta, psi(th)).real)
        worst = max(worst, val)
    assert worst <= 1e-6, f"norm transport defect {worst:.3e}"


@_check("fd-convergence")
def _fd_convergence(ctx: VerifyContext) -> None:
    curve = ParamCurve(lambda th: np.array([math.sin(th), math.cos(2.0 * th)], dtype=np.complex128))
    exact = np.array([math.cos(0.5), -2.0 * math.sin(1.0)], dtype=np.complex128)
    errs = []
    for step in (1e-2, 1e-3):
        d = geometry.d_theta(curve, 0.5, geometry.FdScheme(step=step))
        errs.append(float(np.linalg.norm(d - exact)))
    ratio = errs[0] / errs[1]
    assert 30.0 <= ratio <= 300.0, f"order-2 error ratio {ratio:.1f}, expected near 100"


@_check("tracking-refinement")
def _tracking_refinement(ctx: VerifyContext) -> None:
    eta_c = _rotating_eta_curve()
    coarse = np.linspace(0.05, 0.45, 9)
    fine = np.linspace(0.05, 0.45, 17)
    tb_c = geometry.track_eigenbasis(eta_c, coarse)
    tb_f = geometry.track_eigenbasis(eta_c, fine)
    for i, th in enumerate(coarse):
        j = tb_f.index_of(float(th))
        diff = fro(tb_c.bases[i] - tb_f.bases[j])
        assert diff <= 1e-8, f"refined basis differs by {diff:.3e} at theta={th:g}"


# --- Fisher information -------------------------------------------------------


@_check("flat-metric-reduction")
def _flat_metric_reduction(ctx: VerifyContext) -> None:
    cases = 20 if ctx.full else 6
    th0 = 0.3
    for case in range(cases):
        dim = int(ctx.rng.integers(2, 5))
        g1 = _rand_hermitian(ctx.rng, dim)
        g2 = _rand_hermitian(ctx.rng, dim)
        psi0 = ctx.rng.standard_normal(dim) + 1j * ctx.rng.standard_normal(dim)
        psi0 = psi0 / np.linalg.norm(psi0)

        def v_of(th):
            return linalg.expm(-1j * th * g1) @ linalg.expm(-1j * th * th * g2)

        curve = cached(ParamCurve(lambda th: v_of(th) @ psi0))
        eye = geometry.constant_curve(np.eye(dim))
        s_val = fisher.sqfi(curve, th0)
        c_val = fisher.cqfi(curve, eye, th0)
        assert abs(s_val - c_val) <= 1e-10 * max(1.0, s_val), (
            f"flat-metric cqfi != sqfi ({abs(s_val - c_val):.3e}) on case {case}"
        )
        e1 = linalg.expm(-1j * th0 * g1)
        e2 = linalg.expm(-1j * th0 * th0 * g2)
        gen = dagger(e2) @ dagger(e1) @ (-1j * g1) @ e1 @ e2 + dagger(e2) @ (-2j * th0 * g2) @ e2
        perp = fisher.project_perp(gen @ psi0, psi0)
        ref = float(4.0 * np.vdot(perp, perp).real)
        assert abs(c_val - ref) <= 1e-8 * max(1.0, ref), (
            f"cqfi {c_val:.12g} != generator form {ref:.12g} on case {case}"
        )


@_check("phase-invariance")
def _phase_invariance(ctx: VerifyContext) -> None:
    def base(th):
        return (1.0 + th * th) * np.array([math.cos(th), math.sin(th)], dtype=np.complex128)

    curve = ParamCurve(base)
    shifted = ParamCurve(lambda th: np.exp(0.7j) * base(th))
    th0 = 0.3
    s1 = fisher.sqfi(curve, th0)
    s2 = fisher.sqfi(shifted, th0)
    assert abs(s1 - s2) <= 1e-9, f"sqfi moved under constant phase ({abs(s1 - s2):.3e})"
    assert abs(s1 - 4.0) <= 1e-8, f"sqfi {s1!r} != 4 for the unit-speed circle curve"
    eye = geometry.constant_curve(np.eye(2))
    c1 = fisher.cqfi(curve, eye, th0)
    c2 = fisher.cqfi(shifted, eye, th0)
    assert abs(c1 - c2) <= 1e-9, f"cqfi moved under constant phase ({abs(c1 - c2):.3e})"
    assert abs(c1 - 4.0) <= 1e-8, f"cqfi {c1!r} != 4 for the unit-speed circle curve"


def _duality_sweeps(ctx: VerifyContext):
    n_add = 100 if ctx.full else 36
    n_pt = 100 if ctx.full else 21
    add = sweep.run_sweep(_sweep_cfg(_ADDITIVE, -0.4, 1.0, n_add, math.pi))
    pt = sweep.run_sweep(_sweep_cfg(_PT, -0.8, 1.0, n_pt, 1.0))
    return add, pt


@_check("duality-worked-models")
def _duality_worked(ctx: VerifyContext) -> None:
    for res in _duality_sweeps(ctx):
        assert not any(res.errors), f"sweep had failures: {next(e for e in res.errors if e)}"
        for s in _clean(res.samples):
            dev = abs(s.sqfi - s.cqfi)
            assert dev <= 1e-6 * max(1.0, s.sqfi), (
                f"duality broken at theta={s.theta:g}: sqfi={s.sqfi!r} cqfi={s.cqfi!r}"
            )


@_check("bound-dominates")
def _bound_dominates(ctx: VerifyContext) -> None:
    # Restricted to families whose mapped preparation S(theta).psi0 keeps a
    # fixed direction, so the evolved family on the Hermitian side is generated
    # by h alone.  The additive and multiplicative metrics are diagonal with a
    # unit first entry (ground probe is drift-free); the PT probe below is the
    # pulled-back equal superposition of the generator extremes, whose image is
    # pinned to one direction for every theta.
    n = 100 if ctx.full else 21
    pt_probe = [[0.0, -1.0], [1.0, 0.0]]
    mult = sweep.run_sweep(_sweep_cfg(_MULTIPLICATIVE, 0.1, 2.0, 40 if ctx.full else 15, 1e-3))
    results = (
        sweep.run_sweep(_sweep_cfg(_ADDITIVE, -0.4, 1.0, n, math.pi)),
        mult,
        sweep.run_sweep(_sweep_cfg(_PT, -0.8, 1.0, n, 1.0, probe=pt_probe)),
    )
    for res in results:
        assert not any(res.errors), f"sweep had failures: {next(e for e in res.errors if e)}"
        for s in _clean(res.samples):
            if not math.isfinite(s.bound):
                continue
            assert s.cqfi <= s.bound * (1.0 + 1e-6) + 1e-9, (
                f"cqfi {s.cqfi!r} above bound {s.bound!r} at theta={s.theta:g}"
            )
    # The multiplicative coupling has unit frequency slope, so its bound column
    # is flat at 4 t^2 regardless of theta.
    for s in _clean(mult.samples):
        assert abs(s.bound - 4e-6) <= 1e-8 * 4e-6 + 1e-18, (
            f"multiplicative bound {s.bound!r} departs from 4t^2 at theta={s.theta:g}"
        )


@_check("identity-closure")
def _identity_closure(ctx: VerifyContext) -> None:
    eta_c = cached(_rotating_eta_curve())
    psi = cached(_rotating_psi_curve())
    grid = np.linspace(0.1, 0.5, 21)
    tracked = geometry.track_eigenbasis(eta_c, grid)
    for th in grid[2::5]:
        sample = fisher.decompose_fh(psi, eta_c, tracked, float(th))
        defect = sample.closure_defect()
        assert defect <= 1e-6 * max(1.0, abs(sample.sqfi)), (
            f"closure defect {defect:.3e} at theta={th:g}"
        )


@_check("dual-path-residual")
def _dual_path_residual(ctx: VerifyContext) -> None:
    n = 50 if ctx.full else 10
    worst = 0.0
    eta_c = cached(_rotating_eta_curve())
    psi = cached(_rotating_psi_curve())
    grid = np.linspace(0.1, 0.5, n)
    tracked = geometry.track_eigenbasis(eta_c, grid)
    for th in grid:
        worst = max(worst, fisher.identity_residual(psi, eta_c, tracked, float(th)))
    assert worst <= 1e-5, f"rotating-family dual-path residual {worst:.3e}"

    for model, t in ((models.NonreciprocalModel(delta=0.5), math.pi), (models.PtModel(), 1.0)):
        system = models.build_system(model)
        raw = _evolved_raw_curve(system, t)
        eta_m = cached(system.eta)
        lo, hi = (-0.4, 1.0) if isinstance(model, models.NonreciprocalModel) else (-0.8, 1.0)
        for th in np.linspace(lo, hi, n):
            tracked = geometry.track_eigenbasis(eta_m, np.array([th]))
            r = fisher.identity_residual(raw, eta_m, tracked, float(th))
            assert r <= 1e-5, f"{system.label} dual-path residual {r:.3e} at theta={th:g}"


@_check("enhancement-k")
def _enhancement_k(ctx: VerifyContext) -> None:
    th0 = 0.2
    k = 0.5
    eta_c = cached(_rotating_eta_curve())
    tracked = geometry.track_eigenbasis(eta_c, np.array([th0]))
    eta = np.asarray(eta_c(th0))
    seed = np.array([1.0, 0.4 + 0.1j], dtype=np.complex128)
    psi0 = seed / math.sqrt(geometry.eta_inner(seed, eta, seed).real)
    a_op = fisher.operator_a(eta_c, tracked, th0)
    a = fisher.project_perp(a_op @ psi0, psi0, eta)
    assert float(geometry.eta_inner(a, eta, a).real) > 1e-6, "fixture needs a nonzero rotation term"
    gamma, _ = geometry.connection(eta_c, th0)
    w = -a / k - gamma @ psi0
    curve = ParamCurve(lambda th: psi0 + (th - th0) * w)
    sample = fisher.decompose_fh(curve, eta_c, tracked, th0)
    assert sample.k_diag is not None and abs(sample.k_diag - k) <= 1e-4, (
        f"k diagnostic {sample.k_diag!r}, expected {k}"
    )
    expect = (1.0 - k) ** 2 * sample.cqfi
    assert abs(sample.sqfi - expect) <= 1e-6 * max(1.0, sample.cqfi), (
        f"enhancement ratio broken: sqfi={sample.sqfi!r}, (1-k)^2 cqfi={expect!r}"
    )


@_check("naive-boundedness")
def _naive_boundedness(ctx: VerifyContext) -> None:
    res = sweep.run_sweep(_sweep_cfg(_ADDITIVE, -0.4, 1.0, 29, math.pi))
    assert not any(res.errors), "sweep had failures"
    for s in res.samples:
        assert math.isfinite(s.sqfi_naive), f"naive sqfi not finite at theta={s.theta:g}"
        assert s.sqfi_naive < 1e6, f"naive sqfi {s.sqfi_naive!r} blew up at theta={s.theta:g}"


@_check("eta-conservation")
def _eta_conservation(ctx: VerifyContext) -> None:
    cases = [
        (models.build_system(models.NonreciprocalModel(delta=0.5)), 0.3),
        (models.build_system(models.PtModel()), 0.4),
    ]
    for system, th in cases:
        for t in np.linspace(0.0, 2.0 * math.pi, 20):
            out = models.evolve_probe(system, th, float(t), "ground")
            drift = abs(out.eta_norm - 1.0)
            assert drift <= 1e-10, f"{system.label} eta-norm drift {drift:.3e} at t={t:g}"

    model = models.NonreciprocalModel(delta=0.5)
    system = models.build_system(model)
    k1, k2 = model.couplings(0.3)
    big = math.sqrt(k1 * k2)
    for t in np.linspace(0.0, 2.0 * math.pi, 20):
        out = models.evolve_probe(system, 0.3, float(t), "ground")
        ref = math.cos(big * t) ** 2 + (k2 / k1) * math.sin(big * t) ** 2
        assert abs(out.flat_norm - ref) <= 1e-12, (
            f"flat norm {out.flat_norm!r} != closed form {ref!r} at t={t:g}"
        )


# --- worked models ------------------------------------------------------------


@_check("closed-vs-generic-metric")
def _closed_vs_generic(ctx: VerifyContext) -> None:
    model = models.NonreciprocalModel(delta=0.5)
    for th in (-0.3, 0.0, 0.5, 1.0):
        sl = models.nonreciprocal(model, th)
        b = metric.metric_bundle(sl.h, "entry11")
        diff = fro(b.eta - sl.eta)
        assert diff <= 1e-9 * max(1.0, fro(sl.eta)), f"nonreciprocal metric off by {diff:.3e} at theta={th}"

    pt = models.PtModel()
    for shift in (0.0, 0.5):
        sl = models.pt_symmetric(pt, shift)
        b = metric.metric_bundle(sl.h, "raw")
        mask = np.abs(sl.eta) > 1e-10
        ratio = b.eta[mask] / sl.eta[mask]
        factor = complex(np.mean(ratio))
        spread = float(np.max(np.abs(ratio - factor)))
        assert factor.real > 0 and spread <= 1e-9 * abs(factor), (
            f"PT metrics not congruent by a scalar (spread {spread:.3e})"
        )
        s_eff = pt.s + shift
        sec_a = 1.0 / math.sqrt(1.0 - (pt.r * math.sin(pt.phi) / s_eff) ** 2)
        assert abs(factor.real - sec_a) <= 1e-9 * sec_a, (
            f"congruence factor {factor.real!r} != sec(alpha) = {sec_a!r}"
        )


@_check("spectrum-reality")
def _spectrum_reality(ctx: VerifyContext) -> None:
    model = models.NonreciprocalModel(delta=0.5)
    for th in np.linspace(-0.4, 1.0, 15):
        sl = models.nonreciprocal(model, float(th))
        vals = linalg.eig_general(sl.h).values
        worst = float(np.max(np.abs(vals.imag)))
        assert worst <= 1e-10 * max(1.0, fro(sl.h)), f"imaginary part {worst:.3e} at theta={th:g}"
    for bad in (-1.0, -1.5):
        try:
            models.nonreciprocal(model, bad)
        except BrokenPhase:
            pass
        else:
            raise AssertionError(f"broken phase not raised at theta={bad}")
    try:
        models.pt_symmetric(models.PtModel(), -1.5)
    except BrokenPhase:
        pass
    else:
        raise AssertionError("broken PT phase not raised at s_eff < |r sin phi|")


@_check("counterpart-hermiticity")
def _counterpart_hermiticity(ctx: VerifyContext) -> None:
    model = models.NonreciprocalModel(delta=0.5)
    for th in np.linspace(-0.45, 1.0, 12):
        sl = models.nonreciprocal(model, float(th))
        defect = fro(sl.hh - dagger(sl.hh))
        assert defect <= 1e-12 * max(1.0, fro(sl.hh)), f"closed-form counterpart defect {defect:.3e}"
        hh = metric.hermitian_counterpart(sl.h, sl.s)
        defect = fro(hh - dagger(hh))
        assert defect <= 1e-12 * max(1.0, fro(hh)), f"generic counterpart defect {defect:.3e}"
    pt = models.PtModel()
    for shift in np.linspace(-0.8, 1.0, 10):
        sl = models.pt_symmetric(pt, float(shift))
        defect = fro(sl.hh - dagger(sl.hh))
        assert defect <= 1e-12 * max(1.0, fro(sl.hh)), f"PT counterpart defect {defect:.3e}"


@_check("ep-guards")
def _ep_guards(ctx: VerifyContext) -> None:
    model = models.NonreciprocalModel(delta=0.5)
    for bad in (-0.5, -0.5 + 1e-15, -2.0):
        try:
            models.nonreciprocal(model, bad)
        except AtExceptionalPoint:
            pass
        else:
            raise AssertionError(f"exceptional point not raised at theta={bad}")
    try:
        models.pt_symmetric(models.PtModel(r=1.0, phi=math.pi / 2, s=1.0), 0.0)
    except (AtExceptionalPoint, BrokenPhase):
        pass
    else:
        raise AssertionError("PT boundary s_eff = |r sin phi| not rejected")
    mult = models.NonreciprocalModel(delta=0.5, parameterization="multiplicative")
    try:
        models.nonreciprocal(mult, 0.0)
    except AtExceptionalPoint:
        pass
    else:
        raise AssertionError("multiplicative theta = 0 not rejected")
    try:
        models.nonreciprocal(mult, -0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("multiplicative theta < 0 not rejected")


# --- CLI-level invariants -----------------------------------------------------


@_check("csv-determinism")
def _csv_determinism(ctx: VerifyContext) -> None:
    cfg = _sweep_cfg(_ADDITIVE, -0.3, 0.7, 41, math.pi)
    first = sweep.run_sweep(cfg, workers=1).csv_text
    second = sweep.run_sweep(cfg, workers=1).csv_text
    assert first == second, "CSV differs between identical sequential runs"
    if ctx.full:
        for name, workers in (("multiplicative", 2), ("pt-bound", 3)):
            pcfg = sweep.preset_config(name)
            one = sweep.run_sweep(pcfg, workers=1).csv_text
            many = sweep.run_sweep(pcfg, workers=workers).csv_text
            assert one == many, f"CSV differs between 1 and {workers} workers for preset {name}"


@_check("config-round-trip")
def _config_round_trip(ctx: VerifyContext) -> None:
    for name in sorted(sweep.PRESETS):
        cfg = sweep.preset_config(name)
        echo = sweep.config_echo(cfg, "sweep")
        again = sweep.config_echo(sweep.parse_config(echo, "sweep"), "sweep")
        assert again == echo, f"preset {name} does not round-trip"
    poly = {
        "model": {"kind": "polynomial", "coefficients": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]},
        "theta": 0.2,
        "time": 0.5,
        "probe": [[1, 0], [0, 1]],
        "gauge": "entry11",
    }
    cfg = sweep.parse_config(poly, "analyze")
    echo = sweep.config_echo(cfg, "analyze")
    again = sweep.config_echo(sweep.parse_config(echo, "analyze"), "analyze")
    assert again == echo, "polynomial analyze config does not round-trip"


@_check("exit-codes")
def _exit_codes(ctx: VerifyContext) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        good = os.path.join(tmp, "good.json")
        with open(good, "w", encoding="utf-8") as fh:
            json.dump({"model": _ADDITIVE, "theta": 0.0, "time": 0.1}, fh)
        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w", encoding="utf-8") as fh:
            json.dump({"model": {"kind": "nonreciprocal", "delta": 0.0}, "theta": 0.0, "time": 0.1}, fh)
        broken = os.path.join(tmp, "broken.json")
        with open(broken, "w", encoding="utf-8") as fh:
            json.dump({"model": _ADDITIVE, "theta": -1.0, "time": 0.1}, fh)

        for path, expected in ((good, 0), (bad, 2), (broken, 3)):
            proc = subprocess.run(
                [sys.executable, "-m", "etaqfi", "analyze", path, "--out", tmp],
                capture_output=True,
                timeout=120,
            )
            assert proc.returncode == expected, (
                f"analyze {os.path.basename(path)}: exit {proc.returncode}, expected {expected}; "
                f"stderr: {proc.stderr.decode(errors='replace')[:200]}"
            )


@_check("figure-properties", full_only=True)
def _figure_properties(ctx: VerifyContext) -> None:
    for name, ep in (("figure1a", -0.5), ("figure1b", -0.2)):
        cfg = sweep.preset_config(name)
        res = sweep.run_sweep(cfg)
        assert not any(res.errors), f"{name}: sweep had failures"
        assert len(res.samples) == cfg.theta_points, f"{name}: row count off"
        first = res.samples[0]
        assert abs(first.theta - (ep + 1e-3)) < 1e-9, f"{name}: grid does not start at EP offset"
        assert first.cqfi > 1e3, f"{name}: cqfi {first.cqfi!r} at closest point not above 1e3"
        window = res.samples[:20]
        for a, b in zip(window, window[1:]):
            assert a.cqfi > b.cqfi, f"{name}: cqfi not increasing toward the EP near theta={b.theta:g}"
        for s in window:
            assert s.sqfi_naive < 1e2, f"{name}: naive sqfi {s.sqfi_naive!r} above 1e2 at theta={s.theta:g}"


# --- runner -------------------------------------------------------------------


def run_check(name: str, seed: int = 0, full: bool = False) -> None:
    """Run one named check, raising on failure (test hook)."""
    for nm, _, fn in _CHECKS:
        if nm == name:
            fn(VerifyContext(rng=np.random.default_rng(seed), full=full))
            return
    raise KeyError(f"no check named {name!r}")


def run(level: str = "fast", seed: int = 0, out=print) -> int:
    """Run the suite; returns the number of failed checks."""
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    full = level == "full"
    failures = 0
    started = time.perf_counter()
    for name, full_only, fn in _CHECKS:
        if full_only and not full:
            continue
        ctx = VerifyContext(rng=np.random.default_rng(seed), full=full)
        t0 = time.perf_counter()
        try:
            fn(ctx)
        except Exception as exc:  # report every failure, keep going
            failures += 1
            out(f"FAIL {name}: {exc}")
        else:
            out(f"ok {name} ({time.perf_counter() - t0:.2f}s)")
    total = time.perf_counter() - started
    out(f"{level} level: {len([1 for _, fo, _ in _CHECKS if full or not fo])} checks, "
        f"{failures} failure(s), {total:.1f}s")
    return failures
