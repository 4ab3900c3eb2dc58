"""Log-domain detailed-balance residuals for Metropolis kernels."""

from __future__ import annotations

import math

import numpy as np

from ..core import NEG_INF, log_density
from ..metropolis import acceptance_log
from ..mwg import coord_acceptance_log


def _residual(lhs: float, rhs: float) -> float:
    if lhs == NEG_INF and rhs == NEG_INF:
        return 0.0
    if lhs == NEG_INF or rhs == NEG_INF:
        return math.inf
    return abs(lhs - rhs)


def mh_balance(target, prop, x, y):
    """Both sides of f(x) q(x,y) alpha(x,y) = f(y) q(y,x) alpha(y,x) in logs, and |difference|."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lhs = log_density(target, x) + prop.log_q(x, y) + acceptance_log(target, prop, x, y)
    rhs = log_density(target, y) + prop.log_q(y, x) + acceptance_log(target, prop, y, x)
    return lhs, rhs, _residual(lhs, rhs)


def coord_balance(target, cp, x, z):
    """Per-coordinate balance for the move x -> y, y = x with coordinate ``cp.index`` set to z."""
    x = np.asarray(x, dtype=np.float64)
    y = x.copy()
    y[cp.pos] = z
    back = float(x[cp.pos])
    lhs = log_density(target, x) + cp.log_q(x, z) + coord_acceptance_log(target, cp, x, z)
    rhs = log_density(target, y) + cp.log_q(y, back) + coord_acceptance_log(target, cp, y, back)
    return lhs, rhs, _residual(lhs, rhs)
