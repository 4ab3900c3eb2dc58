"""Coordinate coverage: when has every coordinate direction been moved?"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..core import InvalidInput, RngStream, Trace

NEVER = -1


def first_accept_steps(trace: Trace, d: int) -> dict:
    """First step at which an accepted move changed each coordinate 1..d (None if never)."""
    out: dict = {c: None for c in range(1, d + 1)}
    remaining = d
    for ev in trace:
        if ev.accepted and isinstance(ev.direction, (int, np.integer)) and 1 <= ev.direction <= d:
            if out[ev.direction] is None:
                out[ev.direction] = ev.step
                remaining -= 1
                if remaining == 0:
                    break
    return out


@dataclass
class CoverageReport:
    d: int
    first_accept: np.ndarray  # (replicas, d); NEVER where the coordinate was never moved
    checkpoints: list
    p_dn: list  # empirical P[D_n] at each checkpoint

    @classmethod
    def from_first_accepts(cls, first: np.ndarray, checkpoints: Sequence[int]) -> "CoverageReport":
        first = np.atleast_2d(np.asarray(first, dtype=np.int64))
        cover = np.where(first == NEVER, np.iinfo(np.int64).max, first).max(axis=1)
        cps = sorted(int(c) for c in checkpoints)
        p = [float(np.mean(cover > n)) for n in cps]
        return cls(first.shape[1], first, cps, p)

    def per_replica(self) -> list:
        return [{c + 1: (None if v == NEVER else int(v)) for c, v in enumerate(row)} for row in self.first_accept]

    def to_dict(self) -> dict:
        return {"d": self.d, "checkpoints": self.checkpoints, "p_dn": self.p_dn,
                "replicas": int(self.first_accept.shape[0])}


def coverage_report(traces, d: int, checkpoints: Iterable[int] = ()) -> CoverageReport:
    """Per-replica first acceptance step per coordinate and the P[D_n] curve.

    ``traces`` is one :class:`Trace` or a sequence of them.  D_n is the event
    that by step n some coordinate has not yet been moved.
    """
    if isinstance(traces, Trace):
        traces = [traces]
    if d < 1:
        raise InvalidInput("d must be >= 1")
    rows = []
    for tr in traces:
        fa = first_accept_steps(tr, d)
        rows.append([NEVER if fa[c] is None else fa[c] for c in range(1, d + 1)])
    return CoverageReport.from_first_accepts(np.array(rows, dtype=np.int64).reshape(-1, d), checkpoints)


def batch_first_accepts(chain, start, n_steps: int, replicas: int, seed: int, stream: int = 0) -> np.ndarray:
    """Run a batched Metropolis-within-Gibbs chain, recording first accepted step per coordinate."""
    gen = RngStream(seed, stream).generator
    X = chain.initial(start, replicas)
    d = X.shape[1]
    first = np.full((replicas, d), NEVER, dtype=np.int64)
    for n in range(1, n_steps + 1):
        X, directions, accepted = chain.step_batch_detailed(X, n, gen)
        for c in range(1, d + 1):
            new = accepted & (directions == c) & (first[:, c - 1] == NEVER)
            first[new, c - 1] = n
    return first
