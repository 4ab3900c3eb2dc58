"""Harris-recurrence diagnostics."""

from .balance import coord_balance, mh_balance
from .coverage import CoverageReport, batch_first_accepts, coverage_report, first_accept_steps
from .discretize import grid_kernel
from .escape import EscapeEstimate, estimate_escape, wilson_interval
from .integrability import Hyperplane, IntegrabilityReport, QuadConfig, hyperplane_integral
from .kernels import (
    DiscreteKernel,
    DriftResult,
    Minorization,
    NumericalError,
    check_drift,
    check_minorization,
    closed_classes,
    communicating_classes,
    hitting_probabilities,
    hitting_probability,
    period,
    stationary_distribution,
    tv_exact,
    tv_period_averaged,
    tv_sequence,
)
from .report import make_report, dumps_report

__all__ = [
    "CoverageReport", "DiscreteKernel", "DriftResult", "EscapeEstimate", "Hyperplane",
    "IntegrabilityReport", "Minorization", "NumericalError", "QuadConfig",
    "batch_first_accepts", "check_drift", "check_minorization", "closed_classes",
    "communicating_classes", "coord_balance", "coverage_report", "dumps_report",
    "estimate_escape", "first_accept_steps", "grid_kernel", "hitting_probabilities",
    "hitting_probability", "hyperplane_integral", "make_report", "mh_balance", "period",
    "stationary_distribution", "tv_exact", "tv_period_averaged", "tv_sequence", "wilson_interval",
]
