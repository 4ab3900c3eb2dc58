"""Ready-made counterexample chains and their closed-form escape probabilities.

``example3`` and ``example4`` are chains that converge only off a null set of
starting points; ``example9`` and ``example14`` are two-dimensional
Metropolis-within-Gibbs configurations (a drifting null line, and an annulus
whose axis subchains split into two pieces).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .core import NEG_INF, InvalidInput, RngStream, TargetDensity
from .diagnostics.kernels import DiscreteKernel
from .mwg import MetropolisWithinGibbs, NormalCoordinate, UniformCoordinate


class CountableChain:
    """Chain on the positive integers given by an exact transition rule."""

    absorbing = frozenset()

    def transitions(self, x: int) -> list:
        """Successor list ``[(state, Fraction probability), ...]``."""
        raise NotImplementedError

    def initial(self, start, replicas: int) -> np.ndarray:
        return np.full(replicas, int(start), dtype=np.int64)

    def step_batch(self, X: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def truncated_kernel(self, n_states: int) -> DiscreteKernel:
        """Kernel on states 1..n_states plus a ``"tail"`` cemetery.

        Mass that would leave the truncation goes to the absorbing cemetery,
        which never reaches any finite state again.
        """
        from scipy import sparse

        size = n_states + 1
        rows, cols, vals = [], [], []
        for x in range(1, n_states + 1):
            for y, p in self.transitions(x):
                j = y - 1 if y <= n_states else n_states
                rows.append(x - 1)
                cols.append(j)
                vals.append(float(p))
        rows.append(n_states)
        cols.append(n_states)
        vals.append(1.0)
        P = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
        P.sum_duplicates()
        labels = list(range(1, n_states + 1)) + ["tail"]
        return DiscreteKernel(labels, P, tail_bias=self.tail_bias(n_states))

    def tail_bias(self, n_states: int) -> float:
        return 0.0


class Example3Chain(CountableChain):
    """P(1, {1}) = 1; for x >= 2, jump to 1 w.p. 1/x^2, else to x + 1."""

    absorbing = frozenset({1})

    def transitions(self, x: int) -> list:
        x = int(x)
        if x < 1:
            raise InvalidInput("states are positive integers")
        if x == 1:
            return [(1, Fraction(1))]
        p = Fraction(1, x * x)
        return [(1, p), (x + 1, 1 - p)]

    def step(self, x: int, rng: RngStream) -> int:
        if x == 1:
            return 1
        return 1 if rng.random() * x * x < 1.0 else x + 1

    def step_batch(self, X, n, gen):
        u = gen.random(len(X))
        Xf = X.astype(np.float64)
        jump = (u * Xf * Xf < 1.0) | (X == 1)
        return np.where(jump, 1, X + 1)

    def tail_bias(self, n_states: int) -> float:
        # sum_{j > N} 1/j^2 bounds the absorption mass lost past the truncation
        return 1.0 / n_states

    @staticmethod
    def escape_bias_bound(start: int, horizon: int) -> float:
        return 1.0 / (start + horizon)


def example3() -> Example3Chain:
    return Example3Chain()


@dataclass(frozen=True)
class Reciprocal:
    """The point 1/m, held exactly."""

    m: int

    @property
    def value(self) -> float:
        return 1.0 / self.m


@dataclass(frozen=True)
class Generic:
    """Any point of [0, 1] that is not tracked as a reciprocal."""

    value: float


Ex4State = Union[Reciprocal, Generic]


class Example4Chain:
    """Kernel on [0, 1]: from 1/m, regenerate uniformly w.p. 1/m^2, else go to 1/(m+1).

    Every other point regenerates uniformly.  Batched states are ``(n, 2)``
    arrays of ``[m, value]`` with ``m = 0`` marking a generic point; uniform
    draws land on a reciprocal with probability zero and are tagged generic.
    """

    def transition(self, s: Ex4State) -> dict:
        if isinstance(s, Reciprocal):
            p = Fraction(1, s.m * s.m)
            return {"uniform": p, Reciprocal(s.m + 1): 1 - p}
        return {"uniform": Fraction(1)}

    def step(self, s: Ex4State, rng: RngStream) -> Ex4State:
        if isinstance(s, Reciprocal) and rng.random() * s.m * s.m >= 1.0:
            return Reciprocal(s.m + 1)
        return Generic(float(rng.random()))

    @staticmethod
    def parse_state(start) -> Ex4State:
        if isinstance(start, (Reciprocal, Generic)):
            return start
        if isinstance(start, str):
            start = Fraction(start)
        if isinstance(start, Fraction):
            if start.numerator == 1 and start.denominator >= 1:
                return Reciprocal(start.denominator)
            return Generic(float(start))
        return Generic(float(start))

    def initial(self, start, replicas: int) -> np.ndarray:
        s = self.parse_state(start)
        row = [float(s.m), s.value] if isinstance(s, Reciprocal) else [0.0, s.value]
        return np.tile(np.array(row), (replicas, 1))

    def step_batch(self, X, n, gen):
        m = X[:, 0]
        u = gen.random(len(X))
        v = gen.random(len(X))
        advance = (m > 0) & (u * m * m >= 1.0)
        out = np.empty_like(X)
        out[:, 0] = np.where(advance, m + 1, 0.0)
        out[:, 1] = np.where(advance, 1.0 / (m + 1), v)
        return out

    @staticmethod
    def null_set(X) -> np.ndarray:
        """Membership in {1/2, 1/3, ...}."""
        return X[:, 0] >= 2

    @staticmethod
    def escape_bias_bound(start, horizon: int) -> float:
        return 1.0 / (Example4Chain.parse_state(start).m + horizon)


def example4() -> Example4Chain:
    return Example4Chain()


_EX9_LOG_CONST = 1.0 - math.log(2.0)


def _ex9_log_f(x) -> float:
    x1, x2 = float(x[0]), float(x[1])
    if not x1 > 1.0:
        return NEG_INF
    if x2 == 0.0:
        return _EX9_LOG_CONST + x1
    if 2.0 * x1 > 709.0:
        return NEG_INF
    return _EX9_LOG_CONST + x1 - abs(x2) * math.exp(2.0 * x1)


def _ex9_log_f_batch(X) -> np.ndarray:
    x1, x2 = X[:, 0], X[:, 1]
    with np.errstate(over="ignore", invalid="ignore"):
        pen = np.where(x2 == 0.0, 0.0, np.abs(x2) * np.exp(2.0 * x1))
        out = _EX9_LOG_CONST + x1 - pen
    return np.where(x1 > 1.0, out, NEG_INF)


def example9():
    """Target (e/2) exp(x1 - |x2| e^{2 x1}) on {x1 > 1} with unit-normal coordinate proposals."""
    target = TargetDensity(2, _ex9_log_f, _ex9_log_f_batch, name="ex9")
    return target, [NormalCoordinate(1, 1.0), NormalCoordinate(2, 1.0)]


def example9_chain(scan: str = "random") -> MetropolisWithinGibbs:
    target, props = example9()
    return MetropolisWithinGibbs(target, props, scan)


def ex9_on_line(X) -> np.ndarray:
    """Membership in the null line {x2 = 0}."""
    return X[:, 1] == 0.0


ANNULUS_INNER = 4.0
ANNULUS_OUTER = 5.0


def _ex14_log_f(x) -> float:
    r2 = float(x[0]) ** 2 + float(x[1]) ** 2
    return 0.0 if ANNULUS_INNER**2 < r2 < ANNULUS_OUTER**2 else NEG_INF


def _ex14_log_f_batch(X) -> np.ndarray:
    r2 = X[:, 0] ** 2 + X[:, 1] ** 2
    return np.where((r2 > ANNULUS_INNER**2) & (r2 < ANNULUS_OUTER**2), 0.0, NEG_INF)


def example14():
    """Uniform target on the annulus 16 < x1^2 + x2^2 < 25, Uniform(x_i +- 1) proposals."""
    target = TargetDensity(2, _ex14_log_f, _ex14_log_f_batch, name="ex14")
    return target, [UniformCoordinate(1, 1.0), UniformCoordinate(2, 1.0)]


def example14_chain(scan: str = "random") -> MetropolisWithinGibbs:
    target, props = example14()
    return MetropolisWithinGibbs(target, props, scan)


def escape_closed_form(x: int) -> float:
    """P[never absorbed | X_0 = x] for the ex3 chain: prod_{j>=x}(1 - 1/j^2) = (x-1)/x."""
    if int(x) != x or x < 2:
        raise InvalidInput("escape_closed_form needs an integer x >= 2")
    x = int(x)
    return (x - 1) / x


EXAMPLES = ("ex3", "ex4", "ex9", "ex14")
