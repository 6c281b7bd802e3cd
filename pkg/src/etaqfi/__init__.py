"""Fisher information on the curved Hilbert space of pseudo-Hermitian Hamiltonians.

The package builds metric operators eta from biorthogonal eigensystems (or
model closed forms), differentiates them covariantly along a parameter, and
computes flat, covariant, and mapped quantum Fisher information together
with the generator bound. A CLI (`etaqfi`) drives single-point analyses,
grid sweeps with CSV output, and a self-check suite.
"""

__version__ = "0.1.0"

from .errors import (
    AtExceptionalPoint,
    BrokenPhase,
    ConfigError,
    EtaqfiError,
    NotPositiveDefinite,
)
from .geometry import FdScheme, ParamCurve, connection, covariant_derivative, track_eigenbasis
from .metric import (
    MetricBundle,
    check_pseudo_hermiticity,
    hermitian_counterpart,
    metric_bundle,
)
from .fisher import (
    ProbeState,
    QfiSample,
    cqfi,
    decompose_fh,
    evolve,
    optimal_probe,
    qfi_bound,
    sqfi,
)
from .models import (
    NonreciprocalModel,
    ParameterizedSystem,
    PolynomialModel,
    PtModel,
    build_system,
    evolve_probe,
)
from .sweep import PRESETS, SweepConfig, parse_config, preset_config, run_analyze, run_sweep

__all__ = [
    "__version__",
    "AtExceptionalPoint",
    "BrokenPhase",
    "ConfigError",
    "EtaqfiError",
    "NotPositiveDefinite",
    "FdScheme",
    "ParamCurve",
    "connection",
    "covariant_derivative",
    "track_eigenbasis",
    "MetricBundle",
    "check_pseudo_hermiticity",
    "hermitian_counterpart",
    "metric_bundle",
    "ProbeState",
    "QfiSample",
    "cqfi",
    "decompose_fh",
    "evolve",
    "optimal_probe",
    "qfi_bound",
    "sqfi",
    "NonreciprocalModel",
    "ParameterizedSystem",
    "PolynomialModel",
    "PtModel",
    "build_system",
    "evolve_probe",
    "PRESETS",
    "SweepConfig",
    "parse_config",
    "preset_config",
    "run_analyze",
    "run_sweep",
]
