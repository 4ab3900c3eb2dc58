"""Grid discretization of Metropolis-within-Gibbs chains for class and period analysis."""

from __future__ import annotations

import itertools
import math
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from ..core import NEG_INF, InvalidInput, as_point
from .kernels import DiscreteKernel

MIN_EDGE = 1e-12


def grid_kernel(chain, step: float, lower, upper, base=None, min_edge: float = MIN_EDGE) -> DiscreteKernel:
    """Discretize a Metropolis-within-Gibbs chain onto cell centres.

    Coordinates updated by ``chain.proposals`` range over cell centres
    ``lower + (k + 1/2) step`` inside ``[lower, upper]``; all other coordinates
    stay at their value in ``base``.  Only centres inside the support become
    states.  From a centre x, each proposal slot is chosen with probability
    1/slots, the proposal density is discretized over the grid line through x
    (normalized over the box), and the move is accepted with alpha_i.
    Transitions below ``min_edge`` are folded into the holding probability.
    """
    target = chain.target
    d = target.dim
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (d,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (d,)).copy()
    base = np.zeros(d) if base is None else as_point(base, d)
    free = sorted({cp.pos for cp in chain.proposals})
    if step <= 0:
        raise InvalidInput("grid step must be positive")
    axes = {}
    for c in free:
        n_cells = int(math.floor((upper[c] - lower[c]) / step + 1e-9))
        if n_cells < 1:
            raise InvalidInput(f"box too small on coordinate {c + 1}")
        axes[c] = lower[c] + (np.arange(n_cells) + 0.5) * step

    pts = []
    for combo in itertools.product(*(axes[c] for c in free)):
        x = base.copy()
        x[free] = combo
        pts.append(x)
    X = np.array(pts)
    logf = target.batch(X)
    keep = logf > NEG_INF
    X, logf = X[keep], logf[keep]
    if len(X) == 0:
        raise InvalidInput("no grid cell centre lies in the support")
    key = lambda x: tuple(np.round(x, 12))
    index = {key(x): i for i, x in enumerate(X)}

    slots = len(chain.proposals)
    rows, cols, vals = [], [], []
    hold = np.ones(len(X))
    for cp in chain.proposals:
        line = axes[cp.pos]
        for i, x in enumerate(X):
            Xs = np.repeat(x[None, :], len(line), axis=0)
            log_qxy = cp.log_q_batch(Xs, line)
            w = np.exp(log_qxy)
            Z = w.sum()
            if Z <= 0:
                continue
            Y = Xs.copy()
            Y[:, cp.pos] = line
            log_fy = target.batch(Y)
            log_qyx = cp.log_q_batch(Y, np.full(len(line), x[cp.pos]))
            with np.errstate(invalid="ignore"):
                num = log_fy + log_qyx
                den = logf[i] + log_qxy
                log_a = np.where(den == NEG_INF, 0.0, np.where(num == NEG_INF, NEG_INF, np.minimum(0.0, num - den)))
            prob = (w / Z) * np.exp(log_a) / slots
            for y, p in zip(Y, prob):
                if p < min_edge:
                    continue
                j = index.get(key(y))
                if j is None or j == i:
                    continue
                rows.append(i)
                cols.append(j)
                vals.append(p)
                hold[i] -= p
    rows.extend(range(len(X)))
    cols.extend(range(len(X)))
    vals.extend(np.clip(hold, 0.0, 1.0))
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(len(X), len(X)))
    P.sum_duplicates()
    labels = [tuple(float(v) for v in np.round(x, 12)) for x in X]
    return DiscreteKernel(labels, P)
