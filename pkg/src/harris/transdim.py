"""Coordinate-preserving trans-dimensional (reversible-jump) sampling.

States are ``(m, x)`` with ``x`` in R^{d_m}.  A between-model move proposes
m' ~ R(m, .), pads x with fresh Uniform(0, 1) auxiliaries up to
max(d_m, d_m'), maps every coordinate through its own monotone map h^(l),
and keeps the first d_m' coordinates.  Model densities must be normalized
(or have their constants folded into the model weights) for the model
marginal to equal the weights.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    NEG_INF,
    InvalidInput,
    RngStream,
    StepEvent,
    TargetDensity,
    Trace,
    as_point,
    log_density,
    record_step,
    standard_normal,
)
from .mwg import CoordinateProposal, NormalCoordinate, coord_acceptance_log


@dataclass(frozen=True)
class TransDimTarget:
    dims: Mapping[int, int]
    densities: Mapping[int, TargetDensity]
    weights: Mapping[int, float]

    def __post_init__(self):
        ids = set(self.dims)
        if len(ids) < 2:
            raise InvalidInput("need more than one model")
        if set(self.densities) != ids or set(self.weights) != ids:
            raise InvalidInput("dims, densities and weights must list the same models")
        for m in ids:
            if self.densities[m].dim != self.dims[m]:
                raise InvalidInput(f"density for model {m} has dim {self.densities[m].dim}, expected {self.dims[m]}")
            if not self.weights[m] > 0:
                raise InvalidInput(f"weight of model {m} must be positive")
        if abs(math.fsum(self.weights.values()) - 1.0) > 1e-12:
            raise InvalidInput("model weights must sum to 1")

    @property
    def models(self) -> list:
        return sorted(self.dims)

    def log_p(self, m: int) -> float:
        return math.log(self.weights[m])

    def log_pi(self, m: int, x) -> float:
        return self.log_p(m) + log_density(self.densities[m], x)


@dataclass(frozen=True)
class TransDimState:
    m: int
    x: tuple

    def as_tuple(self) -> tuple:
        return (float(self.m),) + tuple(self.x)


def make_state(target: TransDimTarget, m: int, x) -> TransDimState:
    if m not in target.dims:
        raise InvalidInput(f"unknown model {m}")
    x = as_point(x, target.dims[m])
    if log_density(target.densities[m], x) == NEG_INF:
        raise InvalidInput("state must lie in the support of its model density")
    return TransDimState(m, tuple(float(v) for v in x))


class ModelJumpKernel:
    """Model proposal R(m, m') on a finite model list."""

    def __init__(self, probs: Mapping[int, Mapping[int, float]]):
        self.probs = {m: dict(row) for m, row in probs.items()}
        for m, row in self.probs.items():
            if abs(math.fsum(row.values()) - 1.0) > 1e-12 or any(p < 0 for p in row.values()):
                raise InvalidInput(f"row {m} of R is not a probability vector")
            for m2, p in row.items():
                back = self.probs.get(m2, {}).get(m, 0.0)
                if (p > 0) != (back > 0):
                    raise InvalidInput(f"R({m},{m2}) > 0 must match R({m2},{m}) > 0")
        self._choices = {m: (list(row), np.array(list(row.values()))) for m, row in self.probs.items()}

    @classmethod
    def neighbours(cls, models: Sequence[int]) -> "ModelJumpKernel":
        """Uniform over adjacent models in the sorted list."""
        ms = sorted(models)
        probs = {}
        for k, m in enumerate(ms):
            nb = [ms[j] for j in (k - 1, k + 1) if 0 <= j < len(ms)]
            probs[m] = {n: 1.0 / len(nb) for n in nb}
        return cls(probs)

    def log_R(self, m: int, m2: int) -> float:
        p = self.probs.get(m, {}).get(m2, 0.0)
        return math.log(p) if p > 0 else NEG_INF

    def sample(self, m: int, rng: RngStream) -> int:
        keys, ps = self._choices[m]
        u = rng.random()
        acc = 0.0
        for k, p in zip(keys, ps):
            acc += p
            if u < acc:
                return k
        return keys[-1]


class CoordMap:
    """Strictly monotone map of one coordinate with its inverse and log-derivative."""

    def forward(self, v: float) -> float:
        raise NotImplementedError

    def inverse(self, v: float) -> float:
        raise NotImplementedError

    def log_deriv(self, v: float) -> float:
        """log |h'(v)|."""
        raise NotImplementedError

    def inverse_log_deriv(self, v: float) -> float:
        return -self.log_deriv(self.inverse(v))


class IdentityMap(CoordMap):
    def forward(self, v):
        return v

    def inverse(self, v):
        return v

    def log_deriv(self, v):
        return 0.0

    def inverse_log_deriv(self, v):
        return 0.0


class LogitMap(CoordMap):
    """(0, 1) -> R, u -> log(u / (1 - u)); raises auxiliary uniforms to real coordinates."""

    def forward(self, u):
        if not 0.0 < u < 1.0:
            raise InvalidInput(f"logit map needs u in (0, 1), got {u}")
        return math.log(u) - math.log1p(-u)

    def inverse(self, v):
        if v >= 0:
            return 1.0 / (1.0 + math.exp(-v))
        e = math.exp(v)
        return e / (1.0 + e)

    def log_deriv(self, u):
        if not 0.0 < u < 1.0:
            raise InvalidInput(f"logit map needs u in (0, 1), got {u}")
        return -math.log(u) - math.log1p(-u)

    def inverse_log_deriv(self, v):
        # log sigma'(v) = -|v| - 2 log(1 + e^{-|v|})
        a = abs(v)
        return -a - 2.0 * math.log1p(math.exp(-a))


@dataclass
class _Inverted(CoordMap):
    base: CoordMap

    def forward(self, v):
        return self.base.inverse(v)

    def inverse(self, v):
        return self.base.forward(v)

    def log_deriv(self, v):
        return self.base.inverse_log_deriv(v)

    def inverse_log_deriv(self, v):
        return self.base.log_deriv(v)


class CoordinateMaps:
    """Per-coordinate maps h_ij^(l) for every ordered pair with R(i, j) > 0.

    Only maps for i < j need to be given; h_ji^(l) is taken to be the inverse.
    Coordinates without an explicit map, and all coordinates beyond
    max(d_i, d_j), use the identity.
    """

    def __init__(self, dims: Mapping[int, int], maps: Optional[Mapping[tuple, Mapping[int, CoordMap]]] = None):
        self.dims = dict(dims)
        self._maps = {}
        for (i, j), per in (maps or {}).items():
            self._maps[(i, j)] = dict(per)
            self._maps[(j, i)] = {l: _Inverted(mp) for l, mp in per.items()}

    @classmethod
    def default(cls, dims: Mapping[int, int], R: ModelJumpKernel) -> "CoordinateMaps":
        """Identity on shared coordinates, logit on coordinates the smaller model lacks."""
        maps = {}
        for i, row in R.probs.items():
            for j, p in row.items():
                if p <= 0 or (j, i) in maps:
                    continue
                lo, hi = (i, j) if dims[i] <= dims[j] else (j, i)
                maps[(lo, hi)] = {l: LogitMap() for l in range(dims[lo] + 1, dims[hi] + 1)}
        return cls(dims, maps)

    def coord_map(self, i: int, j: int, l: int) -> CoordMap:
        return self._maps.get((i, j), {}).get(l, _IDENTITY)


_IDENTITY = IdentityMap()


def apply_map(maps: CoordinateMaps, i: int, j: int, x) -> tuple:
    """Apply h_ij coordinatewise to an extended point of length max(d_i, d_j).

    Returns ``(x', log_jacobian)`` with x' of the same length.
    """
    width = max(maps.dims[i], maps.dims[j])
    x = list(x)
    if len(x) != width:
        raise InvalidInput(f"extended point must carry {width} coordinates, got {len(x)}")
    out = []
    log_jac = 0.0
    for l, v in enumerate(x, start=1):
        mp = maps.coord_map(i, j, l)
        out.append(mp.forward(v))
        log_jac += mp.log_deriv(v)
    return tuple(out), log_jac


@dataclass
class AuxCounters:
    """Instrumentation: reads of auxiliary coordinates, keyed by move kind."""

    materialized: int = 0
    reads: Counter = field(default_factory=Counter)


def between_model_log_alpha(target: TransDimTarget, R: ModelJumpKernel, maps: CoordinateMaps,
                            s: TransDimState, m2: int, u: Sequence[float]):
    """Proposal and log acceptance for jumping from ``s`` to model ``m2``.

    ``u`` supplies the auxiliary uniforms for coordinates d_m + 1..d_m2.
    Returns ``(x_new, log_alpha)``; x_new is None if the map is undefined.
    """
    m = s.m
    dm, dm2 = target.dims[m], target.dims[m2]
    ext = tuple(s.x) + tuple(u)
    if len(ext) != max(dm, dm2):
        raise InvalidInput("wrong number of auxiliary coordinates")
    mapped, log_jac = apply_map(maps, m, m2, ext)
    x_new = mapped[:dm2]
    log_fy = log_density(target.densities[m2], np.asarray(x_new))
    log_fx = log_density(target.densities[m], np.asarray(s.x))
    if log_fy == NEG_INF:
        return x_new, NEG_INF
    num = target.log_p(m2) + log_fy + R.log_R(m2, m)
    den = target.log_p(m) + log_fx + R.log_R(m, m2)
    return x_new, min(0.0, num - den + log_jac)


def between_model_step(target: TransDimTarget, R: ModelJumpKernel, maps: CoordinateMaps,
                       s: TransDimState, rng: RngStream, counters: Optional[AuxCounters] = None):
    """Propose m' ~ R(m, .) with a coordinatewise dimension-matching map.

    Returns ``(next_state, proposed_model, accepted)``.
    """
    m2 = R.sample(s.m, rng)
    extra = max(0, target.dims[m2] - target.dims[s.m])
    u = tuple(float(v) for v in rng.random(extra)) if extra else ()
    if counters is not None:
        counters.materialized += extra
        counters.reads["between"] += extra
    try:
        x_new, log_a = between_model_log_alpha(target, R, maps, s, m2, u)
    except InvalidInput:
        return s, m2, False
    if log_a >= 0.0 or (log_a > NEG_INF and rng.log_uniform() < log_a):
        return TransDimState(m2, tuple(float(v) for v in x_new)), m2, True
    return s, m2, False


class TransDimSampler:
    """Mixture of between-model jumps (prob ``a``) and random-scan coordinate moves."""

    def __init__(self, target: TransDimTarget, R: ModelJumpKernel, maps: Optional[CoordinateMaps] = None,
                 a: float = 0.5, within: Optional[Mapping[int, Sequence[CoordinateProposal]]] = None):
        if not 0.0 < a < 1.0:
            raise InvalidInput("a must lie strictly between 0 and 1")
        self.target = target
        self.R = R
        self.maps = maps or CoordinateMaps.default(target.dims, R)
        self.a = a
        self.within = {m: list(within[m]) if within and m in within else
                       [NormalCoordinate(l, 1.0) for l in range(1, d + 1)]
                       for m, d in target.dims.items()}
        self.counters = AuxCounters()
        self._force_between = False

    @classmethod
    def _with_a_one(cls, sampler: "TransDimSampler") -> "TransDimSampler":
        """Test hook: the same sampler but every move is a between-model move."""
        clone = cls(sampler.target, sampler.R, sampler.maps, 0.5, sampler.within)
        clone._force_between = True
        return clone

    def step(self, s: TransDimState, rng: RngStream):
        """One transition.  Returns ``(state, kind, direction, accepted)``.

        ``kind`` is ``"between"`` or ``"within"``; ``direction`` is the proposed
        model id for jumps and the 1-based coordinate for within-model moves.
        """
        if self._force_between or rng.random() < self.a:
            s2, m2, acc = between_model_step(self.target, self.R, self.maps, s, rng, self.counters)
            return s2, "between", m2, acc
        props = self.within[s.m]
        cp = props[int(rng.integers(0, len(props)))]
        dens = self.target.densities[s.m]
        x = np.asarray(s.x)
        z = cp.sample_z(x, rng)
        log_a = coord_acceptance_log(dens, cp, x, z)
        if log_a >= 0.0 or (log_a > NEG_INF and rng.log_uniform() < log_a):
            xs = list(s.x)
            xs[cp.pos] = float(z)
            return TransDimState(s.m, tuple(xs)), "within", cp.index, True
        return s, "within", cp.index, False

    def run(self, s0: TransDimState, n_steps: int, rng: RngStream, record: bool = True):
        """Run ``n_steps`` moves; returns ``(final_state, trace, model_counts)``."""
        trace = Trace() if record else None
        counts = Counter()
        s = s0
        for n in range(1, n_steps + 1):
            s, kind, direction, acc = self.step(s, rng)
            counts[s.m] += 1
            if record:
                dir_label = f"m{direction}" if kind == "between" else direction
                trace.steps.append(StepEvent(n, dir_label, acc, s.as_tuple()))
        return s, trace, counts


def transdim_step(target, R, maps, a, within, s, rng):
    """Functional form of :meth:`TransDimSampler.step` returning ``(state, kind, accepted)``."""
    sampler = TransDimSampler(target, R, maps, a, within)
    s2, kind, _, acc = sampler.step(s, rng)
    return s2, kind, acc


@dataclass
class HypothesisReport:
    """Monitoring data for whether within-model moves and coordinate coverage occur."""

    first_within_accept: Optional[int]
    coord_first_accept: dict
    model_visits: dict

    @property
    def event_d(self) -> bool:
        """True when no within-model move was accepted over the trace."""
        return self.first_within_accept is None

    @property
    def all_covered(self) -> bool:
        return all(v is not None for v in self.coord_first_accept.values())

    def to_dict(self) -> dict:
        return {"first_within_accept": self.first_within_accept, "event_d": self.event_d,
                "coord_first_accept": {str(k): v for k, v in self.coord_first_accept.items()},
                "model_visits": {str(k): v for k, v in self.model_visits.items()}}


def theorem_hypothesis_monitor(trace: Trace, start_dim: Optional[int] = None) -> HypothesisReport:
    """Summarize a trans-dimensional trace.

    Reports the first step with an accepted within-model move and, for each
    coordinate 1..d of the starting model, the first step at which a
    within-model move in that direction was accepted (None if never).
    ``start_dim`` defaults to the length of the first recorded state minus
    its model entry.
    """
    if len(trace) == 0:
        raise InvalidInput("trace must be nonempty")
    if start_dim is None:
        start_dim = len(trace[0].state) - 1
    first_within = None
    coords = {l: None for l in range(1, start_dim + 1)}
    visits = Counter()
    for ev in trace:
        visits[int(ev.state[0])] += 1
        if not ev.accepted or not isinstance(ev.direction, (int, np.integer)):
            continue
        if first_within is None:
            first_within = ev.step
        if ev.direction in coords and coords[ev.direction] is None:
            coords[ev.direction] = ev.step
    return HypothesisReport(first_within, coords, dict(sorted(visits.items())))


def toy_family(n_models: int = 3, weights: Optional[Sequence[float]] = None):
    """Models 1..n with d_m = m and standard normal f_m; neighbour jumps, logit raising maps."""
    if n_models < 2:
        raise InvalidInput("toy family needs at least 2 models")
    if weights is None:
        weights = (0.5, 0.3, 0.2) if n_models == 3 else [1.0 / n_models] * n_models
    if len(weights) != n_models:
        raise InvalidInput("need one weight per model")
    ids = list(range(1, n_models + 1))
    target = TransDimTarget({m: m for m in ids}, {m: standard_normal(m) for m in ids},
                            {m: float(w) for m, w in zip(ids, weights)})
    R = ModelJumpKernel.neighbours(ids)
    return target, R, CoordinateMaps.default(target.dims, R)
