"""Parameter curves, finite differences, connection, and basis tracking.

A ParamCurve is theta -> array (state vector or operator). Derivatives come
from central differences unless the curve carries an analytic derivative.
The metric defines a connection Gamma = (1/2) eta^{-1} d_theta eta whose
covariant derivative transports the eta-norm: d_theta <psi|eta|psi> =
2 Re <D_theta psi|psi>_eta.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.optimize

from . import linalg, metric
from .errors import EvalFailure, NotPositiveDefinite, TrackingLost
from .linalg import as_operator, as_vector, dagger, fro, hermitize

DEFAULT_STEP_SCALE = 1e-6
_OVERLAP_FLOOR = 0.5
_AMBIGUITY_GAP = 1e-3
_DEGENERATE_RTOL = 1e-8


@dataclass
class ParamCurve:
    evaluator: Callable[[float], np.ndarray]
    analytic_derivative: Optional[Callable[[float], np.ndarray]] = None

    def __call__(self, theta: float) -> np.ndarray:
        return self.evaluator(theta)


def as_curve(obj) -> ParamCurve:
    if isinstance(obj, ParamCurve):
        return obj
    if callable(obj):
        return ParamCurve(obj)
    raise TypeError(f"expected a ParamCurve or callable, got {type(obj).__name__}")


def constant_curve(value) -> ParamCurve:
    arr = np.asarray(value, dtype=np.complex128)
    zero = np.zeros_like(arr)
    return ParamCurve(lambda _t: arr, lambda _t: zero)


def cached(curve) -> ParamCurve:
    """Memoize curve evaluations (stencil points repeat across operations)."""
    base = as_curve(curve)
    if getattr(base, "memoized", False):
        return base
    memo: dict = {}

    def ev(t):
        key = float(t)
        if key not in memo:
            memo[key] = base(key)
        return memo[key]

    deriv = None
    if base.analytic_derivative is not None:
        dmemo: dict = {}

        def deriv(t):
            key = float(t)
            if key not in dmemo:
                dmemo[key] = base.analytic_derivative(key)
            return dmemo[key]

    out = ParamCurve(ev, deriv)
    out.memoized = True
    return out


@dataclass(frozen=True)
class FdScheme:
    """Central-difference settings: order 2 or 4, optional Richardson pass."""

    order: int = 2
    step: Optional[float] = None  # None -> 1e-6 * max(1, |theta|)
    richardson: bool = False

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError(f"fd order must be 2 or 4, got {self.order}")
        if self.step is not None and not self.step > 1e-12:
            raise ValueError(f"fd step must exceed 1e-12, got {self.step}")

    def step_at(self, theta: float) -> float:
        if self.step is not None:
            return self.step
        return DEFAULT_STEP_SCALE * max(1.0, abs(theta))


def default_scheme() -> FdScheme:
    step = os.environ.get("ETAQFI_FD_STEP")
    return FdScheme(step=float(step)) if step else FdScheme()


def _eval(curve: ParamCurve, theta: float) -> np.ndarray:
    try:
        out = np.asarray(curve(theta), dtype=np.complex128)
    except EvalFailure:
        raise
    except Exception as exc:
        raise EvalFailure(f"curve evaluation failed at theta = {theta!r}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise EvalFailure(f"curve returned non-finite values at theta = {theta!r}")
    return out


def _central(curve: ParamCurve, theta: float, h: float, order: int) -> np.ndarray:
    if order == 2:
        return (_eval(curve, theta + h) - _eval(curve, theta - h)) / (2.0 * h)
    return (
        -_eval(curve, theta + 2 * h)
        + 8.0 * _eval(curve, theta + h)
        - 8.0 * _eval(curve, theta - h)
        + _eval(curve, theta - 2 * h)
    ) / (12.0 * h)


def d_theta(curve, theta: float, scheme: Optional[FdScheme] = None) -> np.ndarray:
    """Derivative of a curve at theta (analytic if available, else central FD)."""
    c = as_curve(curve)
    if c.analytic_derivative is not None:
        out = np.asarray(c.analytic_derivative(theta), dtype=np.complex128)
        if not np.all(np.isfinite(out)):
            raise EvalFailure(f"analytic derivative non-finite at theta = {theta!r}")
        return out
    scheme = scheme or default_scheme()
    h = scheme.step_at(theta)
    d1 = _central(c, theta, h, scheme.order)
    if not scheme.richardson:
        return d1
    d2 = _central(c, theta, h / 2.0, scheme.order)
    weight = 2.0 ** scheme.order
    return (weight * d2 - d1) / (weight - 1.0)


# --- connection and covariant derivative ------------------------------------


def connection(eta_curve, theta: float, scheme: Optional[FdScheme] = None):
    """Gamma = (1/2) eta^{-1} d_theta eta and its compatibility residual.

    Returns (gamma, residual) with residual = ||d_eta - eta Gamma - Gamma^dag eta||_F.
    """
    c = as_curve(eta_curve)
    eta = hermitize(as_operator(_eval(c, theta), "eta"))
    try:
        np.linalg.cholesky(eta)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"metric not positive definite at theta = {theta!r}") from exc
    deta = hermitize(d_theta(c, theta, scheme))
    gamma = 0.5 * linalg.solve(eta, deta)
    residual = fro(deta - eta @ gamma - dagger(gamma) @ eta)
    return gamma, residual


def eta_inner(u, eta, v) -> complex:
    """<u|eta|v> with the physics convention (antilinear in u)."""
    return complex(np.vdot(u, eta @ v))


def covariant_derivative(psi_curve, eta_curve, theta: float, scheme: Optional[FdScheme] = None):
    """D_theta psi = d_theta psi + Gamma psi for an eta-normalized curve.

    Returns (dpsi_cov, residual) where the residual is the norm-transport
    defect |d_theta <psi|eta|psi> - 2 Re <D_theta psi|psi>_eta|; both terms
    vanish for a properly normalized curve.
    """
    pc = as_curve(psi_curve)
    ec = as_curve(eta_curve)
    psi = as_vector(_eval(pc, theta))
    eta = hermitize(as_operator(_eval(ec, theta), "eta"))
    norm_sq = eta_inner(psi, eta, psi).real
    if abs(norm_sq - 1.0) > 1e-8:
        raise ValueError(
            f"state curve must be eta-normalized at theta (got <psi|eta|psi> = {norm_sq!r})"
        )
    dpsi = d_theta(pc, theta, scheme)
    gamma, _ = connection(ec, theta, scheme)
    cov = dpsi + gamma @ psi

    def norm_component(t):
        p = as_vector(_eval(pc, t))
        e = hermitize(as_operator(_eval(ec, t), "eta"))
        return np.array([eta_inner(p, e, p).real])

    dnorm = d_theta(ParamCurve(norm_component), theta, scheme)[0].real
    residual = abs(dnorm - 2.0 * eta_inner(cov, eta, psi).real)
    return cov, float(residual)


# --- eigenbasis tracking -----------------------------------------------------


@dataclass
class TrackedBasis:
    """Metric eigenbasis continued over a theta grid.

    bases[i] columns follow the branches assigned by maximal overlap with the
    previous grid point (descending eigenvalue order at the first point);
    derivatives[i] is dU/dtheta from fine-step central differences of the
    pinned-gauge family, column-aligned to bases[i]. degenerate[i] marks
    eigenvalue gaps below 1e-8 relative resolution.
    """

    grid: np.ndarray
    values: np.ndarray
    bases: np.ndarray
    derivatives: np.ndarray
    degenerate: np.ndarray

    def index_of(self, theta: float) -> int:
        i = int(np.argmin(np.abs(self.grid - theta)))
        if abs(float(self.grid[i]) - theta) > 1e-9 * max(1.0, abs(theta)):
            raise KeyError(f"theta = {theta!r} is not a grid point of this TrackedBasis")
        return i


def _assign_columns(reference: np.ndarray, candidate: np.ndarray, lam: np.ndarray, context: str):
    """Permute candidate columns to match reference by maximal overlap."""
    overlap = np.abs(dagger(reference) @ candidate)
    rows, cols = scipy.optimize.linear_sum_assignment(-overlap)
    perm = np.empty_like(cols)
    perm[rows] = cols
    chosen = overlap[rows, cols]
    if np.any(chosen <= _OVERLAP_FLOOR):
        raise TrackingLost(
            f"{context}: eigenvector overlap {chosen.min():.3f} fell below {_OVERLAP_FLOOR}"
        )
    for i in range(overlap.shape[0]):
        row = np.sort(overlap[i])[::-1]
        if row.size > 1 and row[0] - row[1] < _AMBIGUITY_GAP and row[1] > _OVERLAP_FLOOR:
            raise TrackingLost(
                f"{context}: two column overlaps within {_AMBIGUITY_GAP} of each other"
            )
    return candidate[:, perm], lam[perm]


def track_eigenbasis(eta_curve, grid, scheme: Optional[FdScheme] = None) -> TrackedBasis:
    """Continue the metric eigenbasis over an ascending theta grid."""
    c = as_curve(eta_curve)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("tracking grid must be nonempty")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("tracking grid must be strictly ascending")
    scheme = scheme or default_scheme()

    lams, bases, derivs, degen = [], [], [], []
    for i, th in enumerate(grid):
        eta = hermitize(as_operator(_eval(c, th), "eta"))
        lam, u = metric.metric_eigenbasis(eta)
        if i > 0:
            u, lam = _assign_columns(bases[-1], u, lam, f"grid point {i} (theta={th:g})")
            if np.real(np.trace(dagger(bases[-1]) @ u)) <= 0.0:
                raise TrackingLost(f"sign continuity lost at grid point {i} (theta={th:g})")
        unit_defect = fro(dagger(u) @ u - np.eye(u.shape[0]))
        if unit_defect > 1e-10:
            raise TrackingLost(f"basis lost unitarity ({unit_defect:.3e}) at theta={th:g}")
        gap = np.min(np.abs(np.diff(lam))) if lam.size > 1 else np.inf
        degen.append(bool(gap <= _DEGENERATE_RTOL * max(1.0, float(np.max(np.abs(lam))))))

        h = scheme.step_at(th)
        _, up = metric.metric_eigenbasis(hermitize(as_operator(_eval(c, th + h), "eta")))
        _, um = metric.metric_eigenbasis(hermitize(as_operator(_eval(c, th - h), "eta")))
        up, _ = _assign_columns(u, up, lam.copy(), f"fine stencil +h at theta={th:g}")
        um, _ = _assign_columns(u, um, lam.copy(), f"fine stencil -h at theta={th:g}")
        derivs.append((up - um) / (2.0 * h))
        lams.append(lam)
        bases.append(u)

    return TrackedBasis(
        grid=grid,
        values=np.array(lams),
        bases=np.array(bases),
        derivatives=np.array(derivs),
        degenerate=np.array(degen, dtype=bool),
    )
