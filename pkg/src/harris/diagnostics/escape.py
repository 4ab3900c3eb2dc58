"""Stay-in-set (escape) probability estimation over replicated runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import InvalidInput, RngStream

Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise InvalidInput("n must be positive")
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # guard against rounding putting the point estimate outside the interval
    return min(lo, p), max(hi, p)


@dataclass
class EscapeEstimate:
    estimate: float
    replicas: int
    horizon: int
    ci_low: float
    ci_high: float
    truncation_bias_bound: Optional[float] = None
    exit_steps: np.ndarray = field(default=None, repr=False)

    @property
    def stayed(self) -> int:
        return int(np.sum(self.exit_steps < 0))

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "replicas": self.replicas,
            "horizon": self.horizon,
            "ci": [self.ci_low, self.ci_high],
            "bias_bound": self.truncation_bias_bound,
        }


def estimate_escape(chain, null_set: Callable[[np.ndarray], np.ndarray], start, horizon: int,
                    replicas: int, seed: int, stream: int = 0,
                    bias_bound: Optional[float] = None) -> EscapeEstimate:
    """Fraction of replicas whose path through ``horizon`` never leaves ``null_set``.

    ``chain`` follows the replica-batch protocol: ``initial(start, n)`` returns
    an array with one row per replica and ``step_batch(X, n, gen)`` advances
    it.  ``null_set`` maps such an array to a boolean mask.  Replicas are
    advanced together from one stream keyed by ``(seed, stream)``; a replica
    stops being simulated once it exits.  ``exit_steps`` holds each replica's
    first step outside the set, or -1 if it stayed.
    """
    if horizon < 1:
        raise InvalidInput("horizon must be >= 1")
    if replicas < 100:
        raise InvalidInput("replicas must be >= 100")
    gen = RngStream(seed, stream).generator
    X = chain.initial(start, replicas)
    if not np.all(null_set(X)):
        raise InvalidInput("start state is not in the null set")
    if bias_bound is None and hasattr(chain, "escape_bias_bound"):
        bias_bound = chain.escape_bias_bound(start, horizon)
    exit_steps = np.full(replicas, -1, dtype=np.int64)
    active = np.arange(replicas)
    for n in range(1, horizon + 1):
        X = chain.step_batch(X, n, gen)
        inside = null_set(X)
        if not inside.all():
            exit_steps[active[~inside]] = n
            X = X[inside]
            active = active[inside]
            if active.size == 0:
                break
    stayed = int(active.size)
    lo, hi = wilson_interval(stayed, replicas)
    return EscapeEstimate(stayed / replicas, replicas, horizon, lo, hi, bias_bound, exit_steps)
