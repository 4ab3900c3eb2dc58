"""Full-dimensional Metropolis-Hastings kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    NEG_INF,
    Point,
    RngStream,
    StepEvent,
    TargetDensity,
    Trace,
    accept_draw,
    as_point,
    log_density,
    record_step,
    state_tuple,
)

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class ProposalKernel:
    """Proposal Q(x, .) with density q(x, y) against Lebesgue measure."""

    def sample(self, x: Point, rng: RngStream) -> Point:
        raise NotImplementedError

    def log_q(self, x: Point, y: Point) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianRandomWalk(ProposalKernel):
    scale: float = 1.0

    def sample(self, x, rng):
        return x + self.scale * rng.normal(size=x.shape)

    def log_q(self, x, y):
        z = (np.asarray(y) - np.asarray(x)) / self.scale
        d = z.size
        return float(-0.5 * np.dot(z, z) - d * (_LOG_SQRT_2PI + math.log(self.scale)))


@dataclass(frozen=True)
class IndependenceProposal(ProposalKernel):
    """Proposal that ignores the current state: y ~ g."""

    draw: Callable[[RngStream], Point]
    log_g: Callable[[Point], float]

    def sample(self, x, rng):
        return np.asarray(self.draw(rng), dtype=np.float64)

    def log_q(self, x, y):
        return float(self.log_g(np.asarray(y)))


def mh_log_alpha(log_fx: float, log_qxy: float, log_fy: float, log_qyx: float) -> float:
    """log min[1, f(y)q(y,x) / (f(x)q(x,y))], with alpha = 1 when f(x)q(x,y) = 0."""
    den = log_fx + log_qxy
    if den == NEG_INF:
        return 0.0
    num = log_fy + log_qyx
    if num == NEG_INF:
        return NEG_INF
    return min(0.0, num - den)


def acceptance_log(target: TargetDensity, prop: ProposalKernel, x, y) -> float:
    x = as_point(x, target.dim)
    y = np.asarray(y, dtype=np.float64)
    log_fy = log_density(target, y)
    if log_fy == NEG_INF:
        return NEG_INF if log_density(target, x) + prop.log_q(x, y) > NEG_INF else 0.0
    return mh_log_alpha(log_density(target, x), prop.log_q(x, y), log_fy, prop.log_q(y, x))


def mh_step(target: TargetDensity, prop: ProposalKernel, x, rng: RngStream):
    """One Metropolis-Hastings transition.  Returns ``(next_state, accepted)``."""
    x = as_point(x, target.dim)
    y = prop.sample(x, rng)
    if accept_draw(rng, acceptance_log(target, prop, x, y)):
        return y, True
    return x, False


def rejection_prob(target: TargetDensity, prop: ProposalKernel, x, budget: int, rng: RngStream):
    """Monte Carlo estimate of r(x) = E_q[1 - alpha(x, Y)].

    Returns ``(estimate, standard_error)``.
    """
    if budget < 1000:
        raise ValueError("budget must be at least 1000 draws")
    x = as_point(x, target.dim)
    vals = np.empty(budget)
    for k in range(budget):
        y = prop.sample(x, rng)
        vals[k] = 1.0 - math.exp(acceptance_log(target, prop, x, y))
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(budget))
    return est, se


class MetropolisHastings:
    """Stateful driver around :func:`mh_step` that records a trace."""

    def __init__(self, target: TargetDensity, proposal: ProposalKernel):
        self.target = target
        self.proposal = proposal

    def run(self, x0, n_steps: int, rng: RngStream, trace: Optional[Trace] = None):
        x = as_point(x0, self.target.dim)
        if log_density(self.target, x) == NEG_INF:
            raise ValueError("initial state must lie in the support")
        trace = Trace() if trace is None else trace
        start = trace.last_index
        for n in range(1, n_steps + 1):
            x, acc = mh_step(self.target, self.proposal, x, rng)
            record_step(trace, StepEvent(start + n, 0, acc, state_tuple(x)))
        return x, trace
