"""Flat and covariant quantum Fisher information for pure-state curves.

The flat QFI of a normalized curve is 4 ||(d_theta psi)_perp||^2. With a
parameter-dependent metric the covariant version replaces d_theta by
D_theta = d_theta + Gamma and the projector/norm by their eta versions:
F_c = 4 ||(D_theta psi)_perp||^2_eta. Mapping the curve with S(theta)
(S^dag S = eta) relates the two descriptions; the mismatch decomposes into a
metric-rotation term 4||(A psi)_perp||^2_eta and a cross term
8 Re <(A psi)_perp|(D psi)_perp>_eta, where A = (1/2) U dU^dag
+ (1/2) eta^{-1} U dU^dag eta is built from the tracked metric eigenbasis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import geometry, linalg, metric
from .errors import DegenerateExtremes, NotPositiveDefinite
from .geometry import FdScheme, ParamCurve, TrackedBasis, as_curve, cached, eta_inner
from .linalg import as_operator, as_vector, dagger, eig_hermitian, expm, fro, hermitize

FLAG_NEAR_EP = "NearEP"
FLAG_TRACKING_DEGENERATE = "TrackingDegenerate"
FLAG_BOUND_SMALL_T = "BoundSmallT"

SMALL_T_CUTOFF = 0.01
NEAR_EP_CONDITION = 1e10
_ANTIPARALLEL_ATOL = 1e-6


@dataclass
class QfiSample:
    """One sweep point.

    sqfi is the flat QFI of the mapped curve S(theta) psi(theta) (the
    Hermitian-side value that closes the decomposition identity); sqfi_naive
    is the flat QFI of the flat-renormalized un-mapped curve, the quantity
    that stays bounded at an exceptional point while cqfi diverges. The CSV
    sqfi column carries sqfi_naive.
    """

    theta: float
    time: float = float("nan")
    sqfi: float = float("nan")
    cqfi: float = float("nan")
    bound: float = float("nan")
    term_metric_rotation: float = float("nan")
    term_cross: float = float("nan")
    k_diag: Optional[float] = None
    flags: List[str] = field(default_factory=list)
    sqfi_naive: float = float("nan")

    def closure_defect(self) -> float:
        return abs(self.sqfi - (self.cqfi + self.term_metric_rotation + self.term_cross))


@dataclass
class ProbeState:
    amplitudes: np.ndarray
    normalization: str = "flat"  # "flat" or "eta"

    def __post_init__(self):
        self.amplitudes = as_vector(self.amplitudes, "probe")
        if self.normalization not in ("flat", "eta"):
            raise ValueError(f"normalization must be 'flat' or 'eta', got {self.normalization!r}")


def probe_vector(probe) -> np.ndarray:
    if isinstance(probe, ProbeState):
        return probe.amplitudes
    return as_vector(probe, "probe")


# --- projections and normalized curves --------------------------------------


def project_perp(v, psi, eta=None) -> np.ndarray:
    """Component of v orthogonal to the normalized state psi.

    With eta given, orthogonality is in the eta inner product:
    v - psi <psi|eta|v>.
    """
    vv = as_vector(v, "vector")
    pp = as_vector(psi, "state")
    if eta is None:
        return vv - pp * np.vdot(pp, vv)
    em = as_operator(eta, "eta")
    return vv - pp * eta_inner(pp, em, vv)


def flat_normalized_curve(psi_curve) -> ParamCurve:
    base = as_curve(psi_curve)

    def ev(t):
        v = as_vector(base(t))
        # same scalar expression as the eta normalizer so the two curves agree
        # bit for bit when eta is the identity (the difference would otherwise
        # be amplified by the finite-difference step)
        n = float(np.vdot(v, v).real)
        if n == 0.0:
            raise ValueError(f"state curve vanished at theta = {t!r}")
        return v / np.sqrt(n)

    return ParamCurve(ev)


def eta_normalized_curve(psi_curve, eta_curve) -> ParamCurve:
    pc = as_curve(psi_curve)
    ec = as_curve(eta_curve)

    def ev(t):
        v = as_vector(pc(t))
        eta = hermitize(as_operator(ec(t), "eta"))
        n = eta_inner(v, eta, v).real
        if n <= 0.0:
            raise NotPositiveDefinite(f"eta-norm not positive at theta = {t!r}")
        return v / np.sqrt(n)

    return ParamCurve(ev)


def hermitian_side_curve(psi_curve, eta_curve) -> ParamCurve:
    """S(theta) applied to the eta-normalized curve (flat-normalized output)."""
    normalized = eta_normalized_curve(psi_curve, eta_curve)
    ec = as_curve(eta_curve)

    def ev(t):
        eta = hermitize(as_operator(ec(t), "eta"))
        lam, u = metric.metric_eigenbasis(eta)
        if float(lam[-1]) <= 0.0:
            raise NotPositiveDefinite(f"metric not positive definite at theta = {t!r}")
        s = np.sqrt(lam)[:, None] * dagger(u)
        return s @ normalized(t)

    return ParamCurve(ev)


# --- Fisher information ------------------------------------------------------


def sqfi(psi_curve, theta: float, scheme: Optional[FdScheme] = None) -> float:
    """Flat QFI 4||(d_theta psi)_perp||^2; renormalizes the curve internally."""
    curve = cached(flat_normalized_curve(psi_curve))
    psi = curve(theta)
    dpsi = geometry.d_theta(curve, theta, scheme)
    perp = project_perp(dpsi, psi)
    return float(4.0 * np.vdot(perp, perp).real)


def cqfi(psi_curve, eta_curve, theta: float, scheme: Optional[FdScheme] = None) -> float:
    """Covariant QFI 4||(D_theta psi)_perp||^2_eta; eta-renormalizes internally."""
    ec = cached(eta_curve)
    curve = cached(eta_normalized_curve(psi_curve, ec))
    eta = hermitize(as_operator(ec(theta), "eta"))
    psi = curve(theta)
    cov, _ = geometry.covariant_derivative(curve, ec, theta, scheme)
    perp = project_perp(cov, psi, eta)
    return float(4.0 * eta_inner(perp, eta, perp).real)


def metric_condition(eta) -> float:
    he = eig_hermitian(eta)
    lo = float(he.values[-1])
    if lo <= 0.0:
        return float("inf")
    return float(he.values[0]) / lo


def operator_a(eta_curve, tracked: TrackedBasis, theta: float) -> np.ndarray:
    """A = (1/2) U dU^dag + (1/2) eta^{-1} U dU^dag eta from the tracked basis.

    Uses eta^{-1} U = U Lambda^{-1} to avoid an explicit inverse.
    """
    i = tracked.index_of(theta)
    u = tracked.bases[i]
    du = tracked.derivatives[i]
    lam = tracked.values[i]
    eta = hermitize(as_operator(as_curve(eta_curve)(theta), "eta"))
    dudag = dagger(du)
    m = 0.5 * dudag + 0.5 * (1.0 / lam)[:, None] * (dudag @ eta)
    return u @ m


def _covariant_pieces(psi_curve, eta_curve, tracked, theta, scheme):
    ec = cached(eta_curve)
    curve = cached(eta_normalized_curve(psi_curve, ec))
    eta = hermitize(as_operator(ec(theta), "eta"))
    psi = curve(theta)
    cov, _ = geometry.covariant_derivative(curve, ec, theta, scheme)
    d_perp = project_perp(cov, psi, eta)
    a = operator_a(ec, tracked, theta)
    a_perp = project_perp(a @ psi, psi, eta)
    return eta, psi, d_perp, a_perp


def identity_residual(psi_curve, eta_curve, tracked: TrackedBasis, theta: float,
                      scheme: Optional[FdScheme] = None) -> float:
    """Relative defect between the mapped-curve flat QFI and its covariant form.

    Left side: ||(d_theta S psi)_perp||^2 through the flat machinery on the
    mapped curve. Right side: ||(A psi)_perp + (D psi)_perp||^2_eta through
    the covariant machinery. The two sides share no intermediate results.
    """
    lhs = sqfi(hermitian_side_curve(psi_curve, cached(eta_curve)), theta, scheme) / 4.0
    eta, _, d_perp, a_perp = _covariant_pieces(psi_curve, eta_curve, tracked, theta, scheme)
    total = a_perp + d_perp
    rhs = eta_inner(total, eta, total).real
    return float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30))


def antiparallel_diagnostic(psi_curve, eta_curve, tracked: TrackedBasis, theta: float,
                            scheme: Optional[FdScheme] = None) -> Optional[float]:
    """k such that (A psi)_perp = -k (D psi)_perp, if the two are antiparallel.

    Returns 0.0 when the rotation term vanishes, None when the vectors are
    not collinear (within angular tolerance 1e-6 in the eta inner product)
    or the covariant term vanishes while the rotation term does not.
    """
    eta, _, d_perp, a_perp = _covariant_pieces(psi_curve, eta_curve, tracked, theta, scheme)
    na = eta_inner(a_perp, eta, a_perp).real
    nd = eta_inner(d_perp, eta, d_perp).real
    if na <= 1e-12 * max(nd, 1e-30):
        return 0.0
    if nd <= 1e-12 * na:
        return None
    inner = eta_inner(d_perp, eta, a_perp)
    cos_angle = abs(inner) / np.sqrt(na * nd)
    if 1.0 - cos_angle > _ANTIPARALLEL_ATOL or abs(inner.imag) > _ANTIPARALLEL_ATOL * abs(inner):
        return None
    return float(-inner.real / nd)


def decompose_fh(psi_curve, eta_curve, tracked: TrackedBasis, theta: float,
                 scheme: Optional[FdScheme] = None, time: float = float("nan")) -> QfiSample:
    """Split the mapped-curve flat QFI into covariant, rotation, and cross terms."""
    eta, _, d_perp, a_perp = _covariant_pieces(psi_curve, eta_curve, tracked, theta, scheme)
    cqfi_val = 4.0 * eta_inner(d_perp, eta, d_perp).real
    rot = 4.0 * eta_inner(a_perp, eta, a_perp).real
    cross = 8.0 * eta_inner(a_perp, eta, d_perp).real
    mapped = sqfi(hermitian_side_curve(psi_curve, cached(eta_curve)), theta, scheme)
    naive = sqfi(psi_curve, theta, scheme)

    flags: List[str] = []
    if metric_condition(eta) > NEAR_EP_CONDITION:
        flags.append(FLAG_NEAR_EP)
    if tracked.degenerate[tracked.index_of(theta)]:
        flags.append(FLAG_TRACKING_DEGENERATE)

    return QfiSample(
        theta=float(theta),
        time=float(time),
        sqfi=float(mapped),
        cqfi=float(cqfi_val),
        term_metric_rotation=float(rot),
        term_cross=float(cross),
        k_diag=antiparallel_diagnostic(psi_curve, eta_curve, tracked, theta, scheme),
        flags=flags,
        sqfi_naive=float(naive),
    )


# --- generator, bound, probes ------------------------------------------------


def generator_h(hh_curve, theta: float, t: float, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """Hermitian generator of theta sensitivity for evolution time t.

    For t <= 0.01 the first-order form t * d_theta H^H is returned; otherwise
    h = i (d_theta V) V^dag with V = expm(-i H^H t), computed by central
    differences of the full exponential. The anti-Hermitian part is averaged
    away; a large asymmetry triggers a warning.
    """
    c = as_curve(hh_curve)
    if t <= SMALL_T_CUTOFF:
        h = t * geometry.d_theta(c, theta, scheme)
    else:
        def v_of(tt):
            return expm(-1j * t * hermitize(as_operator(c(tt), "counterpart")))

        vcurve = cached(ParamCurve(v_of))
        v = vcurve(theta)
        dv = geometry.d_theta(vcurve, theta, scheme)
        h = 1j * dv @ dagger(v)
    asym = fro(h - dagger(h))
    if asym > 1e-5 * max(1.0, fro(h)):
        warnings.warn(
            f"generator asymmetry {asym:.3e} beyond finite-difference accuracy",
            RuntimeWarning,
            stacklevel=2,
        )
    return hermitize(h)


def qfi_bound(hh_curve, theta: float, t: float, scheme: Optional[FdScheme] = None) -> float:
    """Squared spectral width of the generator: the pure-state QFI maximum."""
    h = generator_h(hh_curve, theta, t, scheme)
    he = eig_hermitian(h)
    width = float(he.values[0] - he.values[-1])
    return width * width


def optimal_probe(h, s, phase: float = 0.0) -> ProbeState:
    """Equal superposition of the generator's extreme eigenvectors, pulled back.

    Returns S^{-1} (|max> + e^{i phase} |min>)/sqrt(2) as an eta-normalized
    probe (its eta-norm equals the flat norm of the superposition).
    """
    he = eig_hermitian(h)
    width = float(he.values[0] - he.values[-1])
    if width < 1e-10:
        raise DegenerateExtremes(
            f"generator spectral width {width:.3e} below 1e-10; probe direction undefined"
        )
    sup = (he.basis[:, 0] + np.exp(1j * phase) * he.basis[:, -1]) / np.sqrt(2.0)
    amps = linalg.solve(as_operator(s, "s"), sup)
    return ProbeState(amplitudes=amps, normalization="eta")


def evolve(h, psi0, t: float) -> np.ndarray:
    """expm(-i H t) psi0; conserves <psi|eta|psi> for eta-pseudo-Hermitian H."""
    hm = as_operator(h, "hamiltonian")
    return expm(-1j * float(t) * hm) @ as_vector(psi0)
