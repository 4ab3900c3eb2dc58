"""Shared state types: points, target densities, random streams and traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

NEG_INF = -math.inf

Point = np.ndarray


class InvalidInput(ValueError):
    """Raised when an operation's preconditions are violated by its inputs."""


def as_point(coords, dim: Optional[int] = None) -> Point:
    """Validate and return ``coords`` as a finite 1-d float64 array."""
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.size < 1:
        raise InvalidInput(f"point must be a non-empty 1-d sequence, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput(f"point coordinates must be finite, got {x}")
    if dim is not None and x.size != dim:
        raise InvalidInput(f"dimension mismatch: expected {dim}, got {x.size}")
    return x


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalized log-density on an open subset of R^d.

    ``log_f`` receives a 1-d array and must return ``-inf`` exactly when the
    point lies outside the support.  ``log_f_batch`` is an optional vectorized
    form taking an ``(n, d)`` array; it is used by the replica-batched runners.
    """

    dim: int
    log_f: Callable[[Point], float]
    log_f_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput("dim must be >= 1")

    def support(self, x) -> bool:
        return log_density(self, x) > NEG_INF

    def __call__(self, x) -> float:
        return log_density(self, x)

    def batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.log_f_batch is not None:
            out = np.asarray(self.log_f_batch(X), dtype=np.float64)
        else:
            out = np.fromiter((self.log_f(row) for row in X), dtype=np.float64, count=len(X))
        return np.where(np.isnan(out), NEG_INF, out)


def log_density(target: TargetDensity, x) -> float:
    """Return log f(x), or ``-inf`` off the support.  Never returns NaN."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != target.dim:
        raise InvalidInput(f"dimension mismatch: target has dim {target.dim}, point has shape {x.shape}")
    if not np.all(np.isfinite(x)):
        return NEG_INF
    v = float(target.log_f(x))
    if math.isnan(v):
        return NEG_INF
    return v


class RngStream:
    """A reproducible PCG64 stream keyed by ``(seed, stream_id)``.

    The substream key is mixed by numpy's ``SeedSequence(entropy=seed,
    spawn_key=(stream_id,))`` hash, which is documented and stable across
    numpy releases.
    """

    __slots__ = ("seed", "stream_id", "generator")

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed < 2**64) or not (0 <= stream_id < 2**64):
            raise InvalidInput("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def random(self, size=None):
        return self.generator.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def log_uniform(self) -> float:
        """log U for U ~ Uniform(0, 1]; used for log-domain accept tests."""
        return math.log1p(-self.generator.random())


def derive_stream(seed: int, replica: int) -> RngStream:
    return RngStream(seed, replica)


def accept_draw(rng: RngStream, log_alpha: float) -> bool:
    """Accept with probability exp(log_alpha) using a log-uniform comparison."""
    if log_alpha >= 0.0:
        return True
    if log_alpha == NEG_INF:
        return False
    return rng.log_uniform() < log_alpha


Direction = Union[int, str]


@dataclass(frozen=True)
class StepEvent:
    """One sampler step.

    ``direction`` is the proposed coordinate (1-based) for coordinate moves,
    0 for full-dimensional moves, or ``"m<id>"`` for a proposed model jump.
    """

    step: int
    direction: Direction
    accepted: bool
    state: tuple


@dataclass
class Trace:
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    @property
    def last_index(self) -> int:
        return self.steps[-1].step if self.steps else 0

    def append(self, event: StepEvent) -> "Trace":
        return record_step(self, event)

    def to_csv(self) -> str:
        return trace_to_csv(self)


def record_step(trace: Trace, event: StepEvent) -> Trace:
    """Append ``event``; its index must be exactly one past the last index."""
    expected = trace.last_index + 1
    if event.step != expected:
        raise InvalidInput(f"out-of-order step index {event.step}, expected {expected}")
    if not event.accepted and trace.steps and event.state != trace.steps[-1].state:
        raise InvalidInput("rejected step must leave the state unchanged")
    trace.steps.append(event)
    return trace


def format_float(v: float) -> str:
    return repr(float(v))


def trace_to_csv(trace: Iterable[StepEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "direction", "accepted", "coords"])
    for ev in trace:
        w.writerow([ev.step, ev.direction, int(ev.accepted), ";".join(format_float(c) for c in ev.state)])
    return buf.getvalue()


def trace_from_csv(text: str) -> Trace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["step", "direction", "accepted"]:
        raise InvalidInput("not a trace CSV")
    tr = Trace()
    for row in rows[1:]:
        step, direction, accepted, coords = row
        d: Direction = int(direction) if direction.lstrip("-").isdigit() else direction
        state = tuple(float(c) for c in coords.split(";")) if coords else ()
        tr.steps.append(StepEvent(int(step), d, accepted == "1", state))
    return tr


def state_tuple(x: Sequence[float]) -> tuple:
    return tuple(float(c) for c in x)


def standard_normal(dim: int) -> TargetDensity:
    """Normalized standard normal density on R^dim."""
    const = -0.5 * dim * math.log(2 * math.pi)

    def log_f(x):
        return const - 0.5 * float(np.dot(x, x))

    def log_f_batch(X):
        return const - 0.5 * np.einsum("ij,ij->i", X, X)

    return TargetDensity(dim, log_f, log_f_batch, name=f"normal{dim}")
