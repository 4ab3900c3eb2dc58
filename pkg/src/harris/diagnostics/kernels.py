"""Exact computations on finite (or truncated countable) transition matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from ..core import InvalidInput


class NumericalError(ArithmeticError):
    """A linear solve or quadrature failed; ``residual`` carries the evidence."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


class DiscreteKernel:
    """Row-stochastic matrix over an ordered list of state labels.

    ``P`` may be a dense array or any scipy sparse matrix.  ``tail_bias``
    bounds the probability mass misrepresented by truncating a countable chain.
    """

    ROW_TOL = 1e-12

    def __init__(self, states: Sequence[Hashable], P, tail_bias: Optional[float] = None):
        self.states = list(states)
        self.tail_bias = tail_bias
        if sparse.issparse(P):
            P = sparse.csr_matrix(P, dtype=np.float64)
            data = P.data
        else:
            P = np.asarray(P, dtype=np.float64)
            data = P
        n = len(self.states)
        if P.shape != (n, n):
            raise InvalidInput(f"matrix shape {P.shape} does not match {n} states")
        if np.any(data < 0) or np.any(data > 1 + self.ROW_TOL):
            raise InvalidInput("transition probabilities must lie in [0, 1]")
        rows = np.asarray(P.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(rows - 1.0) > self.ROW_TOL)
        if bad.size:
            raise InvalidInput(f"row {self.states[bad[0]]!r} sums to {rows[bad[0]]!r}, not 1")
        self.P = P
        self._index = {s: i for i, s in enumerate(self.states)}
        if len(self._index) != n:
            raise InvalidInput("state labels must be distinct")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.P)

    def index(self, state) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise InvalidInput(f"unknown state {state!r}") from None

    def dense(self) -> np.ndarray:
        return self.P.toarray() if self.is_sparse else self.P

    def row(self, i: int) -> np.ndarray:
        if self.is_sparse:
            return self.P.getrow(i).toarray().ravel()
        return self.P[i]

    def successors(self, i: int) -> np.ndarray:
        if self.is_sparse:
            lo, hi = self.P.indptr[i], self.P.indptr[i + 1]
            cols, vals = self.P.indices[lo:hi], self.P.data[lo:hi]
            return cols[vals > 0]
        return np.flatnonzero(self.P[i] > 0)

    def push(self, v: np.ndarray) -> np.ndarray:
        """One step of the law: v -> v P."""
        if self.is_sparse:
            return self.P.T @ v
        return v @ self.P

    def delta(self, state) -> np.ndarray:
        v = np.zeros(self.n)
        v[self.index(state)] = 1.0
        return v

    def distribution(self, pi) -> np.ndarray:
        """Coerce ``pi`` (array, or mapping label -> mass) to a vector over states."""
        if isinstance(pi, dict):
            v = np.zeros(self.n)
            for s, p in pi.items():
                v[self.index(s)] = float(p)
        else:
            v = np.asarray(pi, dtype=np.float64)
        if v.shape != (self.n,) or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise InvalidInput("pi must be a probability vector over the kernel's states")
        return v


def law_after(k: DiscreteKernel, start, n: int) -> np.ndarray:
    v = k.delta(start)
    for _ in range(n):
        v = k.push(v)
    return v


def tv_distance(mu: np.ndarray, nu: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(mu) - np.asarray(nu)).sum())


def tv_exact(k: DiscreteKernel, start, n: int, pi) -> float:
    """||P^n(start, .) - pi|| by repeated vector-matrix products."""
    if n < 0:
        raise InvalidInput("n must be nonnegative")
    return tv_distance(law_after(k, start, n), k.distribution(pi))


def tv_sequence(k: DiscreteKernel, start, n_values: Iterable[int], pi) -> list:
    """TV distances at each (sorted) n in ``n_values``, sharing one pass."""
    target = k.distribution(pi)
    wanted = sorted(set(int(n) for n in n_values))
    out = {}
    v = k.delta(start)
    cur = 0
    for n in wanted:
        while cur < n:
            v = k.push(v)
            cur += 1
        out[n] = tv_distance(v, target)
    return [(n, out[n]) for n in wanted]


def stationary_distribution(k: DiscreteKernel) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 (unique for a single recurrent class)."""
    n = k.n
    A = (k.dense().T - np.eye(n))
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"stationary system is singular: {exc}") from exc
    resid = float(np.abs(pi @ k.dense() - pi).max())
    if resid > 1e-10 or np.any(pi < -1e-12):
        raise NumericalError("stationary solve did not yield a distribution", resid)
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def tv_period_averaged(k: DiscreteKernel, D: int, start, n: int, pi=None) -> float:
    """TV between (1/D) sum_{r=1..D} P^{nD+r}(start, .) and pi.

    ``pi`` defaults to the stationary vector from :func:`stationary_distribution`.
    """
    if D < 1:
        raise InvalidInput("D must be >= 1")
    target = stationary_distribution(k) if pi is None else k.distribution(pi)
    v = law_after(k, start, n * D)
    acc = np.zeros(k.n)
    for _ in range(D):
        v = k.push(v)
        acc += v
    return tv_distance(acc / D, target)


def _tarjan(n: int, succ: Callable[[int], Iterable[int]]) -> list:
    """Strongly connected components in reverse topological order (iterative)."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list = []
    comps: list = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                w = int(w)
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def communicating_classes(k: DiscreteKernel) -> list:
    """Strongly connected components of the positive-probability graph.

    Classes are lists of state labels, ordered topologically: a class appears
    before every class it can reach.
    """
    comps = _tarjan(k.n, k.successors)
    return [[k.states[i] for i in comp] for comp in reversed(comps)]


def closed_classes(k: DiscreteKernel) -> list:
    """Communicating classes with no edge leaving them."""
    out = []
    for cls in communicating_classes(k):
        members = {k.index(s) for s in cls}
        if all(int(j) in members for i in members for j in k.successors(i)):
            out.append(cls)
    return out


def period(k: DiscreteKernel) -> int:
    """gcd of cycle lengths; requires a single communicating class."""
    classes = communicating_classes(k)
    if len(classes) != 1:
        raise InvalidInput(f"period needs an irreducible kernel, found {len(classes)} classes")
    level = [-1] * k.n
    level[0] = 0
    frontier = [0]
    g = 0
    while frontier:
        nxt = []
        for u in frontier:
            for v in k.successors(u):
                v = int(v)
                if level[v] == -1:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = math.gcd(g, abs(level[u] + 1 - level[v]))
        frontier = nxt
    return g if g > 0 else 1


def _can_reach(k: DiscreteKernel, targets: np.ndarray) -> np.ndarray:
    """Boolean mask of states with a positive-probability path into ``targets``."""
    if k.is_sparse:
        rev = sparse.csr_matrix(k.P.T)
        rev_succ = lambda j: rev.indices[rev.indptr[j]:rev.indptr[j + 1]][rev.data[rev.indptr[j]:rev.indptr[j + 1]] > 0]
    else:
        rev_succ = lambda j: np.flatnonzero(k.P[:, j] > 0)
    mask = np.zeros(k.n, dtype=bool)
    mask[targets] = True
    frontier = list(targets)
    while frontier:
        j = frontier.pop()
        for i in rev_succ(j):
            if not mask[i]:
                mask[i] = True
                frontier.append(int(i))
    return mask


def hitting_probabilities(k: DiscreteKernel, A) -> np.ndarray:
    """h(x) = P[reach A in >= 0 steps | X_0 = x] for every state.

    States with no path into ``A`` get 0; the remaining first-passage system
    (I - P_BB) h_B = P_BA 1 is solved directly.
    """
    A_idx = np.array(sorted({k.index(a) for a in A}), dtype=np.int64)
    if A_idx.size == 0:
        raise InvalidInput("target set A must be nonempty")
    h = np.zeros(k.n)
    h[A_idx] = 1.0
    reach = _can_reach(k, A_idx)
    inA = np.zeros(k.n, dtype=bool)
    inA[A_idx] = True
    B = np.flatnonzero(reach & ~inA)
    if B.size == 0:
        return h
    P = sparse.csr_matrix(k.P) if not k.is_sparse else k.P
    P_BB = P[B][:, B]
    rhs = np.asarray(P[B][:, A_idx].sum(axis=1)).ravel()
    M = sparse.identity(B.size, format="csc") - P_BB.tocsc()
    with np.errstate(all="ignore"):
        try:
            sol = splinalg.spsolve(M, rhs)
        except RuntimeError as exc:
            raise NumericalError(f"first-passage system is singular: {exc}") from exc
    sol = np.atleast_1d(sol)
    resid = float(np.abs(M @ sol - rhs).max()) if np.all(np.isfinite(sol)) else math.inf
    if not math.isfinite(resid) or resid > 1e-8:
        raise NumericalError("first-passage system is singular or ill-conditioned", resid)
    h[B] = np.clip(sol, 0.0, 1.0)
    return h


def hitting_probability(k: DiscreteKernel, A, start) -> float:
    """P[tau_A < inf | X_0 = start] with tau_A = inf{n >= 1 : X_n in A}.

    For ``start`` outside A this is the usual first-passage probability; for
    ``start`` inside A it is the return probability sum_y P(start, y) h(y).
    """
    A = set(A)
    h = hitting_probabilities(k, A)
    i = k.index(start)
    if start in A:
        return float(np.clip(k.row(i) @ h, 0.0, 1.0))
    return float(h[i])


@dataclass(frozen=True)
class Minorization:
    epsilon: float
    nu: np.ndarray
    C: tuple


def check_minorization(k: DiscreteKernel, C) -> Optional[Minorization]:
    """Best (epsilon, nu) with P(x, .) >= epsilon nu(.) for all x in C, or None."""
    C = tuple(C)
    if not C:
        raise InvalidInput("C must be nonempty")
    rows = np.vstack([k.row(k.index(c)) for c in C])
    col_min = rows.min(axis=0)
    eps = float(col_min.sum())
    if eps <= 0.0:
        return None
    nu = col_min / eps
    # re-verify entrywise
    if np.any(rows < eps * nu[None, :] - 1e-15):
        raise NumericalError("minorization re-verification failed")
    return Minorization(eps, nu, C)


@dataclass(frozen=True)
class DriftResult:
    state: object
    expectation: float
    std_error: float
    bound: float
    satisfied: bool
    exact: bool


def check_drift(kernel, V, C, b: float, probes, budget: int = 10_000, rng=None) -> list:
    """Test E[V(X_1) | x] <= V(x) - 1 + b 1_C(x) at each probe state.

    ``kernel`` may be a :class:`DiscreteKernel` or any object with an exact
    ``transitions(x)`` successor list (both evaluated exactly), or a callable
    ``step(x, rng)`` sampled ``budget`` times per probe.  ``C`` is a
    predicate or a collection of states.
    """
    in_C = C if callable(C) else (lambda x, _s=set(C): x in _s)
    out = []
    for x in probes:
        vx = float(V(x))
        if not vx > 0:
            raise InvalidInput(f"V must be positive on probe states; V({x!r}) = {vx}")
        bound = vx - 1.0 + (b if in_C(x) else 0.0)
        if isinstance(kernel, DiscreteKernel):
            row = kernel.row(kernel.index(x))
            vals = np.array([float(V(s)) for s in kernel.states])
            ev, se, exact = float(row @ vals), 0.0, True
        elif hasattr(kernel, "transitions"):
            total = sum(Fraction(p) * Fraction(V(y)) for y, p in kernel.transitions(x))
            ev, se, exact = float(total), 0.0, True
        else:
            if rng is None:
                raise InvalidInput("a Monte Carlo drift check needs an RngStream")
            draws = np.array([float(V(kernel(x, rng))) for _ in range(budget)])
            ev = float(draws.mean())
            se = float(draws.std(ddof=1) / math.sqrt(budget))
            exact = False
        out.append(DriftResult(x, ev, se, bound, ev <= bound, exact))
    return out
