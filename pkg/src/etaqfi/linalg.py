"""Dense complex linear-algebra kernels with pinned conventions.

Everything downstream assumes the guarantees fixed here: deterministic
eigenvalue ordering, unit-norm eigenvectors with a deterministic phase gauge,
and loud failures instead of silently bad output. The heavy lifting is done by
LAPACK through numpy (Hessenberg + shifted QR for the general problem) and by
scipy's scaling-and-squaring Pade approximant for the matrix exponential;
this module owns the contracts, not the algorithms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    NoConvergence,
    NotHermitian,
    OverflowRiskWarning,
    Singular,
)

# Pivots below SINGULAR_RTOL * max(1, ||M||_F) are treated as exact zeros.
SINGULAR_RTOL = 1e-14
# Eigenvector-matrix condition above this marks the input as near defective.
DEFECTIVE_CONDITION = 1e12
# 1-norms above this make the exponential's squaring phase risky.
EXPM_NORM_WARN = 1e3

_PHASE_TIE_RTOL = 1e-8


def as_operator(mat, name: str = "operator") -> np.ndarray:
    """Validate and convert input to a square complex128 array."""
    arr = np.asarray(mat, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(vec, name: str = "state") -> np.ndarray:
    arr = np.asarray(vec, dtype=np.complex128).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def dagger(mat) -> np.ndarray:
    return np.asarray(mat).conj().T


def fro(mat) -> float:
    return float(np.linalg.norm(mat, "fro"))


def hermitize(mat) -> np.ndarray:
    return (mat + dagger(mat)) / 2.0


def phase_fix_columns(u) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive.

    The pivot is the first index whose magnitude is within relative 1e-8 of
    the column maximum. Exact magnitude ties are common in symmetric
    eigenbases (e.g. components (-i, 1)/sqrt(2)); a strict argmax would pick
    a different pivot under fp noise and make the gauge chatter along a
    parameter sweep. The gauged column is invariant under the arbitrary
    incoming phase, so it inherits the smoothness of the eigenvector ray.
    """
    out = np.array(u, dtype=np.complex128, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        mags = np.abs(col)
        top = float(mags.max())
        if top == 0.0:
            continue
        pivot = int(np.argmax(mags >= (1.0 - _PHASE_TIE_RTOL) * top))
        phase = col[pivot] / abs(col[pivot])
        out[:, j] = col * np.conj(phase)
        out[pivot, j] = abs(col[pivot])
    return out


# --- eigendecompositions ---------------------------------------------------


@dataclass
class EigenSystem:
    """Right eigendecomposition of a general complex matrix.

    values are sorted by descending real part (ties: descending imaginary
    part); right_vectors holds the matching unit-norm columns in the pinned
    phase gauge. vector_condition is the 2-norm condition number of the
    eigenvector matrix; near_defective flags vector_condition > 1e12.
    """

    values: np.ndarray
    right_vectors: np.ndarray
    vector_condition: float
    near_defective: bool


def eig_general(mat) -> EigenSystem:
    m = as_operator(mat)
    try:
        values, vectors = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver did not converge: {exc}") from exc
    order = np.lexsort((-values.imag, -values.real))
    values = values[order]
    vectors = vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    vectors = phase_fix_columns(vectors)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(vectors))
    if not np.isfinite(cond):
        cond = np.inf
    return EigenSystem(values, vectors, cond, bool(cond > DEFECTIVE_CONDITION))


@dataclass
class HermitianEigen:
    """Real eigenvalues in descending order with orthonormal basis columns."""

    values: np.ndarray
    basis: np.ndarray


def eig_hermitian(mat, check_tol: float = 1e-10) -> HermitianEigen:
    m = as_operator(mat)
    defect = fro(m - dagger(m))
    if defect > check_tol * max(1.0, fro(m)):
        raise NotHermitian(
            f"matrix is not Hermitian: ||M - M^dag|| = {defect:.3e} "
            f"exceeds {check_tol:.0e} * max(1, ||M||)"
        )
    values, basis = np.linalg.eigh(hermitize(m))
    values = np.ascontiguousarray(values[::-1])
    basis = np.ascontiguousarray(basis[:, ::-1])
    basis = phase_fix_columns(basis)
    return HermitianEigen(values, basis)


# --- exponential, solve, inverse -------------------------------------------


def expm(mat) -> np.ndarray:
    m = as_operator(mat)
    norm1 = float(np.linalg.norm(m, 1))
    if norm1 > EXPM_NORM_WARN:
        warnings.warn(
            f"expm input 1-norm {norm1:.3g} exceeds {EXPM_NORM_WARN:.0e}; "
            "result may lose accuracy in the squaring phase",
            OverflowRiskWarning,
            stacklevel=2,
        )
    return np.asarray(scipy.linalg.expm(m))


def solve(a, b) -> np.ndarray:
    """Solve a x = b through a pivot-checked LU factorization."""
    m = as_operator(a, "matrix")
    rhs = np.asarray(b, dtype=np.complex128)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < SINGULAR_RTOL * max(1.0, fro(m)):
        raise Singular(
            f"matrix is numerically singular (smallest pivot {pivots.min():.3e})"
        )
    return scipy.linalg.lu_solve((lu, piv), rhs)


def inverse(a) -> np.ndarray:
    m = as_operator(a, "matrix")
    return solve(m, np.eye(m.shape[0], dtype=np.complex128))
