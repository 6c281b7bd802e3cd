"""Worked model families and the generic parameterized-system wrapper.

Two closed-form families are provided. The nonreciprocal two-level system
H = [[omega, k1], [k2, -omega]] has metric eta = diag(1, k1/k2), factor
S = diag(1, sqrt(k1/k2)), and counterpart off-diagonal sqrt(k1 k2); its
exceptional points sit where k1 k2 = 0. The PT-symmetric system
H = [[r e^{i phi}, s], [s, r e^{-i phi}]] in its exact phase
(s_eff > |r sin phi|) has eta = sec(alpha) [[1, -i sin(alpha)],
[i sin(alpha), 1]] with sin(alpha) = r sin(phi)/s_eff, eigenvalues
sec(alpha) +/- |tan(alpha)|, and a purely real-plus-imaginary-offdiagonal
counterpart. A polynomial-in-theta family covers everything else through the
generic biorthogonal metric construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from . import fisher, metric
from .errors import AtExceptionalPoint, BrokenPhase
from .geometry import ParamCurve
from .linalg import as_operator, dagger, hermitize

EP_PRODUCT_RADIUS = 1e-14

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)


# --- model descriptions -------------------------------------------------------


@dataclass(frozen=True)
class NonreciprocalModel:
    omega: float = 0.0
    delta: float = 0.5
    parameterization: str = "additive"  # additive | multiplicative | raw
    k1: Optional[float] = None
    k2: Optional[float] = None

    def __post_init__(self):
        if self.parameterization not in ("additive", "multiplicative", "raw"):
            raise ValueError(
                f"parameterization must be additive, multiplicative, or raw, "
                f"got {self.parameterization!r}"
            )
        if not (math.isfinite(self.omega) and math.isfinite(self.delta)):
            raise ValueError("omega and delta must be finite")
        if self.parameterization == "raw":
            if self.k1 is None or self.k2 is None:
                raise ValueError("raw parameterization requires k1 and k2")
            if self.k1 == self.k2:
                raise ValueError("couplings must differ (k1 != k2)")
        else:
            if self.k1 is not None or self.k2 is not None:
                raise ValueError("k1/k2 are only valid with the raw parameterization")
            if self.delta == 0.0:
                raise ValueError("delta must be nonzero")
            if abs(self.delta) == 1.0:
                raise ValueError("delta = +/-1 makes the couplings equal at every theta")

    def couplings(self, theta: float) -> Tuple[float, float]:
        if self.parameterization == "additive":
            return 1.0 / self.delta + theta, self.delta + theta
        if self.parameterization == "multiplicative":
            if theta < 0.0:
                raise ValueError("multiplicative parameterization is defined for theta > 0")
            return theta / self.delta, theta * self.delta
        return float(self.k1), float(self.k2)

    def d_couplings(self) -> Tuple[float, float]:
        if self.parameterization == "additive":
            return 1.0, 1.0
        if self.parameterization == "multiplicative":
            return 1.0 / self.delta, self.delta
        return 0.0, 0.0

    def ep_thetas(self) -> Tuple[float, ...]:
        if self.parameterization == "additive":
            return (-1.0 / self.delta, -self.delta)
        if self.parameterization == "multiplicative":
            return (0.0,)
        return ()


@dataclass(frozen=True)
class PtModel:
    r: float = 1.0
    phi: float = math.pi / 2
    s: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.phi) and math.isfinite(self.s)):
            raise ValueError("r, phi, s must be finite")
        if self.r < 0.0:
            raise ValueError("r must be nonnegative (absorb signs into phi)")

    def ep_thetas(self) -> Tuple[float, ...]:
        return (abs(self.r * math.sin(self.phi)) - self.s,)


@dataclass(frozen=True)
class PolynomialModel:
    """H(theta) = sum_n coefficients[n] * theta^n."""

    coefficients: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("polynomial model needs at least one coefficient matrix")
        mats = tuple(as_operator(c, f"coefficient {i}") for i, c in enumerate(self.coefficients))
        dims = {m.shape[0] for m in mats}
        if len(dims) != 1:
            raise ValueError("coefficient matrices must share one dimension")
        object.__setattr__(self, "coefficients", mats)

    @property
    def dim(self) -> int:
        return self.coefficients[0].shape[0]

    def ep_thetas(self) -> Tuple[float, ...]:
        return ()


# --- closed-form slices -------------------------------------------------------


@dataclass
class ModelSlice:
    """Everything a model knows in closed form at one parameter value."""

    h: np.ndarray
    dh: np.ndarray
    eta: np.ndarray
    deta: np.ndarray
    s: np.ndarray
    hh: np.ndarray
    dhh: np.ndarray
    lam: np.ndarray
    u: np.ndarray
    residual_ph: float


def nonreciprocal(model: NonreciprocalModel, theta: float) -> ModelSlice:
    k1, k2 = model.couplings(theta)
    prod = k1 * k2
    if abs(prod) <= EP_PRODUCT_RADIUS:
        raise AtExceptionalPoint(
            f"k1*k2 = {prod:.3e} at theta = {theta!r}; metric is singular there"
        )
    if prod < 0.0:
        raise BrokenPhase(
            f"k1*k2 = {prod:.3e} < 0 at theta = {theta!r}; spectrum is not real"
        )
    om = model.omega
    h = np.array([[om, k1], [k2, -om]], dtype=np.complex128)
    ratio = k1 / k2
    eta = np.array([[1.0, 0.0], [0.0, ratio]], dtype=np.complex128)
    s = np.array([[1.0, 0.0], [0.0, math.sqrt(ratio)]], dtype=np.complex128)
    big = math.sqrt(prod)
    hh = np.array([[om, big], [big, -om]], dtype=np.complex128)
    dk1, dk2 = model.d_couplings()
    dh = np.array([[0.0, dk1], [dk2, 0.0]], dtype=np.complex128)
    deta = np.array(
        [[0.0, 0.0], [0.0, (dk1 * k2 - k1 * dk2) / (k2 * k2)]], dtype=np.complex128
    )
    dbig = (dk1 * k2 + k1 * dk2) / (2.0 * big)
    dhh = np.array([[0.0, dbig], [dbig, 0.0]], dtype=np.complex128)
    if ratio >= 1.0:
        lam = np.array([ratio, 1.0])
        u = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    else:
        lam = np.array([1.0, ratio])
        u = np.eye(2, dtype=np.complex128)
    residual = metric.check_pseudo_hermiticity(h, eta)
    return ModelSlice(h, dh, eta, deta, s, hh, dhh, lam, u, residual)


def pt_symmetric(model: PtModel, theta_shift: float) -> ModelSlice:
    """Slice of the PT family with the coupling shifted: s -> s + theta_shift."""
    s_eff = model.s + theta_shift
    rsin = model.r * math.sin(model.phi)
    gap = s_eff - abs(rsin)
    if abs(gap) <= EP_PRODUCT_RADIUS * max(1.0, abs(s_eff)):
        raise AtExceptionalPoint(
            f"s + shift = {s_eff!r} hits |r sin phi| = {abs(rsin)!r}"
        )
    if gap < 0.0 or s_eff <= 0.0:
        raise BrokenPhase(
            f"s + shift = {s_eff!r} must exceed |r sin phi| = {abs(rsin)!r}"
        )
    sin_a = rsin / s_eff
    cos_a = math.sqrt(1.0 - sin_a * sin_a)
    sec_a = 1.0 / cos_a
    tan_a = sin_a / cos_a
    g = s_eff * cos_a

    h = np.array(
        [
            [model.r * np.exp(1j * model.phi), s_eff],
            [s_eff, model.r * np.exp(-1j * model.phi)],
        ],
        dtype=np.complex128,
    )
    dh = _SIGMA_X.copy()
    rc = model.r * math.cos(model.phi)
    hh = np.array([[rc, 1j * g], [-1j * g, rc]], dtype=np.complex128)
    dg = s_eff / g
    dhh = np.array([[0.0, 1j * dg], [-1j * dg, 0.0]], dtype=np.complex128)

    if abs(sin_a) < 1e-12:
        eta = np.eye(2, dtype=np.complex128)
        deta = np.zeros((2, 2), dtype=np.complex128)
        lam = np.array([1.0, 1.0])
        u = np.eye(2, dtype=np.complex128)
        s_mat = np.eye(2, dtype=np.complex128)
    else:
        eta = sec_a * np.array([[1.0, -1j * sin_a], [1j * sin_a, 1.0]], dtype=np.complex128)
        d_alpha = -tan_a / s_eff
        d_sec = sec_a * tan_a * d_alpha
        d_sin = cos_a * d_alpha
        deta = d_sec * np.array(
            [[1.0, -1j * sin_a], [1j * sin_a, 1.0]], dtype=np.complex128
        ) + sec_a * np.array([[0.0, -1j * d_sin], [1j * d_sin, 0.0]], dtype=np.complex128)
        lam = np.array([sec_a + abs(tan_a), sec_a - abs(tan_a)])
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        if sin_a > 0:
            u = np.array([[-1j, 1j], [1.0, 1.0]], dtype=np.complex128) * inv_sqrt2
        else:
            u = np.array([[1j, -1j], [1.0, 1.0]], dtype=np.complex128) * inv_sqrt2
        s_mat = np.sqrt(lam)[:, None] * dagger(u)

    residual = metric.check_pseudo_hermiticity(h, eta)
    return ModelSlice(h, dh, eta, deta, s_mat, hh, dhh, lam, u, residual)


def polynomial(model: PolynomialModel, theta: float):
    """H(theta) and its exact derivative for the polynomial family."""
    h = np.zeros((model.dim, model.dim), dtype=np.complex128)
    dh = np.zeros_like(h)
    for n, c in enumerate(model.coefficients):
        h += c * theta**n
        if n >= 1:
            dh += n * c * theta ** (n - 1)
    return h, dh


# --- parameterized systems ----------------------------------------------------


@dataclass
class ParameterizedSystem:
    """theta -> Hamiltonian plus whatever metric data the model can supply."""

    dim: int
    label: str
    h: ParamCurve
    eta: ParamCurve
    hh: ParamCurve
    s_of: Callable[[float], np.ndarray]
    bundle_of: Callable[[float], metric.MetricBundle]
    ep_thetas: Tuple[float, ...] = ()
    gauge: str = "closed-form"
    params: dict = field(default_factory=dict)


def _nonreciprocal_system(model: NonreciprocalModel, gauge: str) -> ParameterizedSystem:
    sl = lambda th: nonreciprocal(model, th)
    h_curve = ParamCurve(lambda th: sl(th).h, lambda th: sl(th).dh)
    if gauge in ("closed-form", "entry11"):
        # the published metric already has eta_11 = 1, so both gauges coincide
        eta_curve = ParamCurve(lambda th: sl(th).eta, lambda th: sl(th).deta)
        s_of = lambda th: sl(th).s

        def bundle_of(th):
            x = sl(th)
            return metric.bundle_from_closed_form(
                x.eta, h=x.h, lam=x.lam, u=x.u, s=x.s, gauge=gauge
            )
    else:
        eta_curve = ParamCurve(lambda th: metric.metric_bundle(sl(th).h, gauge).eta)
        s_of = lambda th: metric.metric_bundle(sl(th).h, gauge).s
        bundle_of = lambda th: metric.metric_bundle(sl(th).h, gauge)
    hh_curve = ParamCurve(lambda th: sl(th).hh, lambda th: sl(th).dhh)
    params = {
        "kind": "nonreciprocal",
        "omega": model.omega,
        "delta": model.delta,
        "parameterization": model.parameterization,
    }
    if model.parameterization == "raw":
        params.update(k1=model.k1, k2=model.k2)
    return ParameterizedSystem(
        dim=2,
        label=f"nonreciprocal/{model.parameterization}",
        h=h_curve,
        eta=eta_curve,
        hh=hh_curve,
        s_of=s_of,
        bundle_of=bundle_of,
        ep_thetas=model.ep_thetas(),
        gauge=gauge,
        params=params,
    )


def _pt_system(model: PtModel, gauge: str) -> ParameterizedSystem:
    sl = lambda th: pt_symmetric(model, th)
    h_curve = ParamCurve(lambda th: sl(th).h, lambda th: sl(th).dh)
    if gauge == "closed-form":
        eta_curve = ParamCurve(lambda th: sl(th).eta, lambda th: sl(th).deta)
        s_of = lambda th: sl(th).s

        def bundle_of(th):
            x = sl(th)
            return metric.bundle_from_closed_form(
                x.eta, h=x.h, lam=x.lam, u=x.u, s=x.s, gauge=gauge
            )
    elif gauge == "entry11":
        # closed form rescaled by eta_11 = sec(alpha); still fully analytic
        def eta_of(th):
            x = sl(th)
            return x.eta / x.eta[0, 0].real

        def deta_of(th):
            x = sl(th)
            c = x.eta[0, 0].real
            dc = x.deta[0, 0].real
            return x.deta / c - x.eta * (dc / (c * c))

        eta_curve = ParamCurve(eta_of, deta_of)

        def bundle_of(th):
            x = sl(th)
            c = x.eta[0, 0].real
            lam = x.lam / c
            return metric.bundle_from_closed_form(
                x.eta / c, h=x.h, lam=lam, u=x.u,
                s=np.sqrt(lam)[:, None] * dagger(x.u), gauge=gauge,
            )

        s_of = lambda th: bundle_of(th).s
    else:
        eta_curve = ParamCurve(lambda th: metric.metric_bundle(sl(th).h, gauge).eta)
        s_of = lambda th: metric.metric_bundle(sl(th).h, gauge).s
        bundle_of = lambda th: metric.metric_bundle(sl(th).h, gauge)
    hh_curve = ParamCurve(lambda th: sl(th).hh, lambda th: sl(th).dhh)
    return ParameterizedSystem(
        dim=2,
        label="pt-symmetric",
        h=h_curve,
        eta=eta_curve,
        hh=hh_curve,
        s_of=s_of,
        bundle_of=bundle_of,
        ep_thetas=model.ep_thetas(),
        gauge=gauge,
        params={"kind": "pt", "r": model.r, "phi": model.phi, "s": model.s},
    )


def _polynomial_system(model: PolynomialModel, gauge: str) -> ParameterizedSystem:
    h_curve = ParamCurve(
        lambda th: polynomial(model, th)[0], lambda th: polynomial(model, th)[1]
    )
    bundle_of = lambda th: metric.metric_bundle(polynomial(model, th)[0], gauge)
    eta_curve = ParamCurve(lambda th: bundle_of(th).eta)

    def hh_of(th):
        b = bundle_of(th)
        return metric.hermitian_counterpart(polynomial(model, th)[0], b.s)

    return ParameterizedSystem(
        dim=model.dim,
        label="polynomial",
        h=h_curve,
        eta=eta_curve,
        hh=ParamCurve(hh_of),
        s_of=lambda th: bundle_of(th).s,
        bundle_of=bundle_of,
        ep_thetas=(),
        gauge=gauge,
        params={"kind": "polynomial", "degree": len(model.coefficients) - 1, "dim": model.dim},
    )


def build_system(model, gauge: str = "closed-form") -> ParameterizedSystem:
    if gauge not in metric.GAUGES:
        raise ValueError(f"unknown gauge {gauge!r}; expected one of {metric.GAUGES}")
    if isinstance(model, NonreciprocalModel):
        return _nonreciprocal_system(model, gauge)
    if isinstance(model, PtModel):
        return _pt_system(model, gauge)
    if isinstance(model, PolynomialModel):
        return _polynomial_system(model, gauge)
    raise TypeError(f"unsupported model type {type(model).__name__}")


# --- probe evolution ----------------------------------------------------------


@dataclass
class EvolvedProbe:
    state: np.ndarray
    flat_norm: float
    eta_norm: float


def ground_probe(dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[0] = 1.0
    return v


def resolve_probe(probe, dim: int) -> np.ndarray:
    if isinstance(probe, str):
        if probe != "ground":
            raise ValueError(f"unknown probe keyword {probe!r}")
        return ground_probe(dim)
    vec = fisher.probe_vector(probe)
    if vec.size != dim:
        raise ValueError(f"probe dimension {vec.size} does not match system dimension {dim}")
    return vec


def evolve_probe(system, theta: float, t: float, probe="ground") -> EvolvedProbe:
    """Evolve an eta-normalized probe and report both norms of the result.

    Accepts a ParameterizedSystem or a bare model (default gauge). The probe
    is eta(theta)-normalized before evolution, so the returned eta_norm is 1
    up to the accuracy of the exponential.
    """
    if not isinstance(system, ParameterizedSystem):
        system = build_system(system)
    eta = hermitize(as_operator(system.eta(theta), "eta"))
    vec = resolve_probe(probe, system.dim)
    nrm = float(np.vdot(vec, eta @ vec).real)
    if nrm <= 0.0:
        raise BrokenPhase(f"probe has non-positive eta-norm at theta = {theta!r}")
    vec = vec / math.sqrt(nrm)
    state = fisher.evolve(system.h(theta), vec, t)
    flat = float(np.vdot(state, state).real)
    eta_norm = float(np.vdot(state, eta @ state).real)
    return EvolvedProbe(state=state, flat_norm=flat, eta_norm=eta_norm)
