"""Metric construction for Hamiltonians with real spectrum and H^dag eta = eta H.

A diagonalizable H with real eigenvalues admits a positive-definite metric
eta built from its left eigenvectors. Factoring eta = S^dag S with
S = sqrt(Lambda) U^dag turns H into the Hermitian counterpart S H S^{-1} and
maps states between the two descriptions. The overall scale of eta is pure
gauge for every covariant quantity downstream, so three display gauges are
offered: entry11 (eta_11 = 1), closed-form (det eta = 1), raw (no rescale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import (
    ComplexSpectrum,
    NearDefectiveMatrix,
    NotHermitianResult,
    NotPositiveDefinite,
)
from .linalg import as_operator, as_vector, dagger, eig_general, eig_hermitian, fro, hermitize

GAUGES = ("entry11", "closed-form", "raw")

# Relative eigenvalue gap below which a metric eigenspace is treated as one
# cluster and re-based canonically (see metric_eigenbasis).
_CLUSTER_RTOL = 1e-13
_REAL_SPECTRUM_RTOL = 1e-8


@dataclass
class BiorthogonalSystem:
    """Right/left eigenvector pair with <left_i|right_j> = delta_ij.

    values are real and descending; right columns are unit norm; left columns
    are the rows of right^{-1}, conjugated, so biorthonormality is exact up to
    the solve accuracy even for clustered spectra.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray


def biorthogonal_system(h) -> BiorthogonalSystem:
    m = as_operator(h, "hamiltonian")
    es = eig_general(m)
    if es.vector_condition > linalg.DEFECTIVE_CONDITION:
        raise NearDefectiveMatrix(
            f"eigenvector condition {es.vector_condition:.3e} exceeds "
            f"{linalg.DEFECTIVE_CONDITION:.0e}; too close to defective"
        )
    imag_peak = float(np.abs(es.values.imag).max())
    if imag_peak > _REAL_SPECTRUM_RTOL * max(1.0, fro(m)):
        raise ComplexSpectrum(
            f"imaginary spectral part {imag_peak:.3e} exceeds tolerance; "
            "no positive-definite metric exists in the broken phase"
        )
    left = dagger(linalg.inverse(es.right_vectors))
    return BiorthogonalSystem(es.values.real.copy(), es.right_vectors, left)


# --- metric eigenbasis with a stable gauge ----------------------------------


def metric_eigenbasis(eta):
    """Descending eigendecomposition of a Hermitian metric, stably gauged.

    Eigenvalue clusters with relative gap below 1e-13 are re-based through a
    column-pivoted QR of the cluster projector: any orthonormal basis of the
    eigenspace is equally valid, and the projector varies smoothly with eta
    even where the individual LAPACK vectors do not. Without this, a metric
    that is (numerically) proportional to the identity on a subspace would
    produce S(theta) factors that jump wildly between nearby theta values.
    Columns carry the pinned largest-entry-real-positive phase.
    """
    he = eig_hermitian(eta)
    lam = he.values.copy()
    u = he.basis.copy()
    n = lam.size
    scale = max(abs(float(lam[0])), abs(float(lam[-1])), 1e-300)
    cuts = [0]
    for i in range(1, n):
        if lam[i - 1] - lam[i] > _CLUSTER_RTOL * scale:
            cuts.append(i)
    cuts.append(n)
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 2:
            continue
        q = u[:, a:b]
        proj = q @ dagger(q)
        qfull, _, _ = scipy.linalg.qr(proj, pivoting=True)
        u[:, a:b] = qfull[:, : b - a]
    u = linalg.phase_fix_columns(u)
    return lam, u


@dataclass
class MetricBundle:
    """Metric with its eigendata, factor, and diagnostics.

    eta = basis @ diag(lam) @ basis^dag with lam descending;
    s = sqrt(lam) basis^dag satisfies s^dag s = eta. residual_ph is the
    normalized pseudo-Hermiticity defect of the source Hamiltonian w.r.t.
    eta; condition = lam_max / lam_min.
    """

    eta: np.ndarray
    basis: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    residual_ph: float
    posdef: bool
    gauge: str
    condition: float


def _gauge_scale(eta, lam, gauge: str) -> float:
    if gauge == "raw":
        return 1.0
    if gauge == "entry11":
        c = float(eta[0, 0].real)
        if c <= 0.0:
            raise NotPositiveDefinite("eta_11 is not positive; entry11 gauge undefined")
        return c
    if gauge == "closed-form":
        # geometric mean of the eigenvalues = det(eta)^(1/n)
        return float(np.exp(np.mean(np.log(lam))))
    raise ValueError(f"unknown gauge {gauge!r}; expected one of {GAUGES}")


def metric_from_biorthogonal(b: BiorthogonalSystem, gauge: str = "entry11") -> MetricBundle:
    left = np.asarray(b.left, dtype=np.complex128)
    eta = hermitize(left @ dagger(left))
    lam, u = metric_eigenbasis(eta)
    if float(lam[-1]) <= 0.0 or not np.all(np.isfinite(lam)):
        raise NotPositiveDefinite(
            f"metric has non-positive eigenvalue {float(lam[-1]):.3e}"
        )
    c = _gauge_scale(eta, lam, gauge)
    eta = eta / c
    lam = lam / c
    s = np.sqrt(lam)[:, None] * dagger(u)
    hrec = b.right @ np.diag(b.values.astype(np.complex128)) @ linalg.inverse(b.right)
    residual = check_pseudo_hermiticity(hrec, eta)
    condition = float(lam[0] / lam[-1])
    return MetricBundle(eta, u, lam, s, residual, True, gauge, condition)


def metric_bundle(h, gauge: str = "entry11") -> MetricBundle:
    """Metric bundle straight from a Hamiltonian (biorthogonal route)."""
    return metric_from_biorthogonal(biorthogonal_system(h), gauge)


def bundle_from_closed_form(eta, h=None, lam=None, u=None, s=None, gauge: str = "closed-form") -> MetricBundle:
    """Assemble a bundle from model-supplied closed forms, checking the factor."""
    eta = hermitize(as_operator(eta, "eta"))
    if lam is None or u is None:
        lam, u = metric_eigenbasis(eta)
    else:
        lam = np.asarray(lam, dtype=float)
        u = as_operator(u, "basis")
    if float(np.min(lam)) <= 0.0:
        raise NotPositiveDefinite("closed-form metric is not positive definite")
    if s is None:
        s = np.sqrt(lam)[:, None] * dagger(u)
    else:
        s = as_operator(s, "s")
    factor_defect = fro(dagger(s) @ s - eta)
    if factor_defect > 1e-12 * max(1.0, fro(eta)):
        raise NotPositiveDefinite(
            f"supplied factor fails s^dag s = eta by {factor_defect:.3e}"
        )
    residual = check_pseudo_hermiticity(h, eta) if h is not None else 0.0
    condition = float(np.max(lam) / np.min(lam))
    return MetricBundle(eta, u, np.asarray(lam, float), s, residual, True, gauge, condition)


def factor_metric(bundle: MetricBundle) -> np.ndarray:
    """Return S with S^dag S = eta, checked to 1e-12 * ||eta||."""
    s = np.sqrt(bundle.lam)[:, None] * dagger(bundle.basis)
    defect = fro(dagger(s) @ s - bundle.eta)
    if defect > 1e-12 * max(1.0, fro(bundle.eta)):
        raise NotPositiveDefinite(
            f"factorization defect {defect:.3e} exceeds 1e-12 * ||eta||"
        )
    return s


def hermitian_counterpart(h, s) -> np.ndarray:
    """Similarity transform S H S^{-1}, Hermitized on return.

    Accepts a defect up to 1e-6 * max(1, ||H||); a clean construction stays
    below 1e-9 * max(1, ||H||).
    """
    hm = as_operator(h, "hamiltonian")
    sm = as_operator(s, "s")
    hh = sm @ hm @ linalg.inverse(sm)
    defect = fro(hh - dagger(hh))
    if defect > 1e-6 * max(1.0, fro(hm)):
        raise NotHermitianResult(
            f"counterpart Hermiticity defect {defect:.3e} exceeds 1e-6 * max(1, ||H||)"
        )
    return hermitize(hh)


def check_pseudo_hermiticity(h, eta) -> float:
    """Normalized defect ||H^dag eta - eta H||_F / (||eta||_F ||H||_F)."""
    hm = as_operator(h, "hamiltonian")
    em = as_operator(eta, "eta")
    defect = fro(dagger(hm) @ em - em @ hm)
    denom = fro(em) * fro(hm)
    if denom == 0.0:
        return 0.0
    return defect / denom


def map_state(psi, s) -> np.ndarray:
    """Map a state to the Hermitian description: psi -> S psi.

    The flat norm of the output equals the eta-norm of the input because
    S^dag S = eta.
    """
    return as_operator(s, "s") @ as_vector(psi)
