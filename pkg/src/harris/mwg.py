"""Metropolis-within-Gibbs kernels: coordinate proposals, scans, subchains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    NEG_INF,
    InvalidInput,
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
from .metropolis import mh_log_alpha

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class CoordinateProposal:
    """Proposal density q_i(x, z) for replacing coordinate ``index`` (1-based) by z.

    Subclasses implement the scalar methods; the ``*_batch`` variants operate
    on an ``(n, d)`` array of current states and default to row loops.
    """

    index: int

    def sample_z(self, x: np.ndarray, rng: RngStream) -> float:
        raise NotImplementedError

    def log_q(self, x: np.ndarray, z: float) -> float:
        raise NotImplementedError

    def sample_z_batch(self, X: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def log_q_batch(self, X: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.array([self.log_q(x, zz) for x, zz in zip(X, z)])

    @property
    def pos(self) -> int:
        return self.index - 1


@dataclass(frozen=True)
class NormalCoordinate(CoordinateProposal):
    """z ~ N(x_i, scale^2)."""

    index: int
    scale: float = 1.0

    def sample_z(self, x, rng):
        return float(x[self.pos] + self.scale * rng.generator.standard_normal())

    def log_q(self, x, z):
        u = (z - x[self.pos]) / self.scale
        return -0.5 * u * u - _LOG_SQRT_2PI - math.log(self.scale)

    def sample_z_batch(self, X, gen):
        return X[:, self.pos] + self.scale * gen.standard_normal(len(X))

    def log_q_batch(self, X, z):
        u = (z - X[:, self.pos]) / self.scale
        return -0.5 * u * u - _LOG_SQRT_2PI - math.log(self.scale)


@dataclass(frozen=True)
class UniformCoordinate(CoordinateProposal):
    """z ~ Uniform[x_i - half_width, x_i + half_width]."""

    index: int
    half_width: float = 1.0

    def sample_z(self, x, rng):
        return float(x[self.pos] + self.half_width * (2.0 * rng.generator.random() - 1.0))

    def log_q(self, x, z):
        if abs(z - x[self.pos]) <= self.half_width:
            return -math.log(2.0 * self.half_width)
        return NEG_INF

    def sample_z_batch(self, X, gen):
        return X[:, self.pos] + self.half_width * (2.0 * gen.random(len(X)) - 1.0)

    def log_q_batch(self, X, z):
        inside = np.abs(z - X[:, self.pos]) <= self.half_width
        return np.where(inside, -math.log(2.0 * self.half_width), NEG_INF)


@dataclass(frozen=True)
class ConditionalCoordinate(CoordinateProposal):
    """Draws coordinate ``index`` from a user-supplied full conditional."""

    index: int
    sampler: Callable[[np.ndarray, RngStream], float]
    log_conditional: Callable[[np.ndarray, float], float]

    def sample_z(self, x, rng):
        return float(self.sampler(x, rng))

    def log_q(self, x, z):
        return float(self.log_conditional(x, z))


def gibbs_conditional_proposal(index: int, sampler, log_conditional) -> ConditionalCoordinate:
    """Wrap an exact full-conditional sampler as a coordinate proposal.

    ``sampler(x, rng)`` must draw from f(x_i | x_{-i}) and
    ``log_conditional(x, z)`` must return its normalized log-density at z; the
    resulting Metropolis-within-Gibbs move then accepts with probability 1.
    """
    return ConditionalCoordinate(index, sampler, log_conditional)


@dataclass(frozen=True)
class ScanSchedule:
    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in ("random", "deterministic"):
            raise InvalidInput(f"scan kind must be 'random' or 'deterministic', got {self.kind!r}")
        if self.d < 1:
            raise InvalidInput("scan dimension must be >= 1")

    def index(self, n: int, rng: Optional[RngStream] = None) -> int:
        """1-based slot chosen at step ``n`` (n >= 1)."""
        if self.kind == "deterministic":
            return (n - 1) % self.d + 1
        return int(rng.generator.integers(1, self.d + 1))


def _replace(x: np.ndarray, pos: int, z: float) -> np.ndarray:
    y = x.copy()
    y[pos] = z
    return y


def coord_acceptance_log(target: TargetDensity, cp: CoordinateProposal, x, z: float) -> float:
    """log alpha_i(x, y) for y = x with coordinate ``cp.index`` set to z."""
    x = as_point(x, target.dim)
    y = _replace(x, cp.pos, z)
    log_fx = log_density(target, x)
    log_qxy = cp.log_q(x, z)
    log_fy = log_density(target, y)
    if log_fx + log_qxy == NEG_INF:
        return 0.0
    if log_fy == NEG_INF:
        return NEG_INF
    return mh_log_alpha(log_fx, log_qxy, log_fy, cp.log_q(y, float(x[cp.pos])))


def mwg_step(target: TargetDensity, proposals: Sequence[CoordinateProposal], schedule: ScanSchedule,
             n: int, x, rng: RngStream):
    """One Metropolis-within-Gibbs move.

    The schedule selects a slot in ``proposals``; the reported direction is the
    coordinate that slot updates.  Returns ``(next_state, direction, accepted)``.
    """
    x = as_point(x, target.dim)
    cp = proposals[schedule.index(n, rng) - 1]
    z = cp.sample_z(x, rng)
    if accept_draw(rng, coord_acceptance_log(target, cp, x, z)):
        return _replace(x, cp.pos, z), cp.index, True
    return x, cp.index, False


def restrict_subchain(proposals: Sequence[CoordinateProposal], coords) -> list:
    """Keep only proposals for coordinates in ``coords`` (1-based)."""
    keep = set(int(i) for i in coords)
    if not keep:
        raise InvalidInput("coordinate subset must be nonempty")
    known = {cp.index for cp in proposals}
    missing = keep - known
    if missing:
        raise InvalidInput(f"no proposal for coordinates {sorted(missing)}")
    return [cp for cp in proposals if cp.index in keep]


class MetropolisWithinGibbs:
    """A configured Metropolis-within-Gibbs chain.

    ``run`` walks a single replica and records a :class:`Trace`;
    ``run_batch`` advances many independent replicas in lock-step with
    vectorized proposals and densities.
    """

    def __init__(self, target: TargetDensity, proposals: Sequence[CoordinateProposal], scan: str = "random"):
        self.target = target
        self.proposals = list(proposals)
        if not self.proposals:
            raise InvalidInput("at least one coordinate proposal is required")
        self.schedule = ScanSchedule(scan, len(self.proposals))

    def restrict(self, coords) -> "MetropolisWithinGibbs":
        return MetropolisWithinGibbs(self.target, restrict_subchain(self.proposals, coords), self.schedule.kind)

    def step(self, n: int, x, rng: RngStream):
        return mwg_step(self.target, self.proposals, self.schedule, n, x, rng)

    def run(self, x0, n_steps: int, rng: RngStream, trace: Optional[Trace] = None):
        x = as_point(x0, self.target.dim)
        if log_density(self.target, x) == NEG_INF:
            raise InvalidInput("initial state must lie in the support")
        trace = Trace() if trace is None else trace
        start = trace.last_index
        for k in range(1, n_steps + 1):
            x, direction, acc = self.step(start + k, x, rng)
            record_step(trace, StepEvent(start + k, direction, acc, state_tuple(x)))
        return x, trace

    def batch_step(self, n: int, X: np.ndarray, gen: np.random.Generator, log_fX: np.ndarray):
        """Advance every row of ``X`` by one move, in place.

        Returns ``(directions, accepted)`` arrays; ``log_fX`` is updated in place.
        """
        m = len(X)
        slots = len(self.proposals)
        if self.schedule.kind == "deterministic":
            chosen = np.full(m, (n - 1) % slots)
        else:
            chosen = gen.integers(0, slots, m)
        directions = np.empty(m, dtype=np.int64)
        accepted = np.zeros(m, dtype=bool)
        log_u = np.log1p(-gen.random(m))
        for s, cp in enumerate(self.proposals):
            rows = np.flatnonzero(chosen == s)
            if rows.size == 0:
                continue
            directions[rows] = cp.index
            Xs = X[rows]
            z = cp.sample_z_batch(Xs, gen)
            Y = Xs.copy()
            Y[:, cp.pos] = z
            log_fy = self.target.batch(Y)
            log_qxy = cp.log_q_batch(Xs, z)
            log_qyx = cp.log_q_batch(Y, Xs[:, cp.pos])
            den = log_fX[rows] + log_qxy
            with np.errstate(invalid="ignore"):
                num = log_fy + log_qyx
                log_a = np.where(den == NEG_INF, 0.0,
                                 np.where(num == NEG_INF, NEG_INF, np.minimum(0.0, num - den)))
            acc = log_u[rows] < log_a
            acc |= log_a >= 0.0
            acc &= log_a > NEG_INF
            hit = rows[acc]
            X[hit, cp.pos] = z[acc]
            log_fX[hit] = log_fy[acc]
            accepted[rows] = acc
        return directions, accepted

    # replica-batch protocol used by the escape and coverage estimators
    def initial(self, start, replicas: int) -> np.ndarray:
        x = as_point(start, self.target.dim)
        if log_density(self.target, x) == NEG_INF:
            raise InvalidInput("initial state must lie in the support")
        return np.tile(x, (replicas, 1))

    def step_batch(self, X: np.ndarray, n: int, gen: np.random.Generator):
        X = X.copy()
        log_fX = self.target.batch(X)
        _, accepted = self.batch_step(n, X, gen, log_fX)
        return X

    def step_batch_detailed(self, X: np.ndarray, n: int, gen: np.random.Generator):
        X = X.copy()
        log_fX = self.target.batch(X)
        directions, accepted = self.batch_step(n, X, gen, log_fX)
        return X, directions, accepted


class CoordinateKernel:
    """View a coordinate proposal as a full-state proposal kernel.

    ``log_q(x, y)`` is the one-dimensional density of y_i on the line through
    x, and ``-inf`` if y differs from x in any other coordinate.
    """

    def __init__(self, cp: CoordinateProposal):
        self.cp = cp

    def sample(self, x, rng):
        return _replace(np.asarray(x, dtype=np.float64), self.cp.pos, self.cp.sample_z(x, rng))

    def log_q(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        mask = np.ones(x.size, dtype=bool)
        mask[self.cp.pos] = False
        if np.any(x[mask] != y[mask]):
            return NEG_INF
        return self.cp.log_q(x, float(y[self.cp.pos]))
