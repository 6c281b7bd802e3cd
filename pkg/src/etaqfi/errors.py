"""Shared error taxonomy and warning categories."""


class EtaqfiError(Exception):
    """Base class for all domain errors raised by this package."""


class NoConvergence(EtaqfiError):
    """The iterative eigensolver failed to converge."""


class NotHermitian(EtaqfiError):
    """Input matrix expected to be Hermitian is not."""


class Singular(EtaqfiError):
    """Matrix is singular (or numerically so) for solve/inverse."""


class NearDefectiveMatrix(EtaqfiError):
    """Eigenvector matrix condition number too large to trust the basis."""


class ComplexSpectrum(EtaqfiError):
    """Spectrum has imaginary parts beyond tolerance (broken phase)."""


class NotPositiveDefinite(EtaqfiError):
    """Candidate metric has a non-positive eigenvalue."""


class NotHermitianResult(EtaqfiError):
    """Similarity-transformed Hamiltonian failed its Hermiticity check."""


class EvalFailure(EtaqfiError):
    """A parameter curve could not be evaluated at a stencil point."""


class TrackingLost(EtaqfiError):
    """Eigenbasis continuation across the grid became ambiguous."""


class AtExceptionalPoint(EtaqfiError):
    """Requested parameter sits on (or numerically at) an exceptional point."""


class BrokenPhase(EtaqfiError):
    """Model parameters are outside the exact (real-spectrum) phase."""


class DegenerateExtremes(EtaqfiError):
    """Generator spectrum too flat to define an optimal probe."""


class ConfigError(EtaqfiError):
    """Invalid CLI/job configuration; message lists field-level problems."""


class OverflowRiskWarning(RuntimeWarning):
    """expm input norm large enough that scaling-and-squaring may degrade."""
