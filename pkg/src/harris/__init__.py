"""MCMC samplers and Harris-recurrence diagnostics."""

__version__ = "0.1.0"

from .core import (
    InvalidInput,
    RngStream,
    StepEvent,
    TargetDensity,
    Trace,
    as_point,
    derive_stream,
    log_density,
    record_step,
    standard_normal,
)
from .metropolis import GaussianRandomWalk, MetropolisHastings, acceptance_log, mh_step, rejection_prob
from .mwg import (
    MetropolisWithinGibbs,
    NormalCoordinate,
    ScanSchedule,
    UniformCoordinate,
    coord_acceptance_log,
    gibbs_conditional_proposal,
    mwg_step,
    restrict_subchain,
)
