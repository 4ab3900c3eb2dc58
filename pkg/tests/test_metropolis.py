import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from harris.core import NEG_INF, RngStream, TargetDensity, standard_normal
from harris.diagnostics.balance import mh_balance
from harris.metropolis import (
    GaussianRandomWalk,
    IndependenceProposal,
    MetropolisHastings,
    acceptance_log,
    mh_log_alpha,
    mh_step,
    rejection_prob,
)

finite = st.floats(-50, 50)


def test_alpha_is_one_when_denominator_vanishes():
    assert mh_log_alpha(NEG_INF, 0.0, -3.0, -1.0) == 0.0
    assert mh_log_alpha(-1.0, NEG_INF, -3.0, -1.0) == 0.0


def test_alpha_zero_outside_support():
    assert mh_log_alpha(-1.0, -1.0, NEG_INF, -1.0) == NEG_INF


@given(finite, finite, finite, finite)
def test_alpha_in_unit_interval(a, b, c, d):
    la = mh_log_alpha(a, b, c, d)
    assert la <= 0.0
    assert la == pytest.approx(min(0.0, (c + d) - (a + b)), abs=1e-12)


def test_symmetric_walk_ratio_matches_density_ratio():
    target = standard_normal(2)
    prop = GaussianRandomWalk(1.0)
    x, y = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    assert acceptance_log(target, prop, x, y) == pytest.approx(-1.0, abs=1e-14)
    assert acceptance_log(target, prop, y, x) == 0.0


def test_rejection_prob_against_closed_form():
    # 1-d standard normal, RW N(0, s^2), from x = 0: r(0) = P[...] = 1 - E min(1, e^{-Y^2/2})
    target = standard_normal(1)
    s = 1.0
    prop = GaussianRandomWalk(s)
    # alpha(0, y) = exp(-y^2/2) and E exp(-Y^2/2) = 1/sqrt(1+s^2) for Y ~ N(0, s^2)
    exact = 1 - 1 / math.sqrt(1 + s * s)
    est, se = rejection_prob(target, prop, [0.0], 20_000, RngStream(1, 0))
    assert abs(est - exact) < 4 * se + 1e-3


def test_rejection_prob_budget_floor():
    with pytest.raises(ValueError):
        rejection_prob(standard_normal(1), GaussianRandomWalk(1.0), [0.0], 10, RngStream(1, 0))


def test_mh_step_rejects_outside_support():
    target = TargetDensity(1, lambda x: 0.0 if 0 < x[0] < 1 else NEG_INF)
    prop = IndependenceProposal(lambda rng: np.array([2.0]), lambda y: 0.0)
    y, acc = mh_step(target, prop, [0.5], RngStream(0, 0))
    assert not acc and y[0] == 0.5


def test_mh_chain_samples_target():
    target = standard_normal(1)
    x, tr = MetropolisHastings(target, GaussianRandomWalk(2.4)).run([0.0], 20_000, RngStream(7, 0))
    xs = np.array([e.state[0] for e in tr])[2000:]
    assert abs(xs.mean()) < 0.1
    assert abs(xs.var() - 1.0) < 0.1
    assert all(e.direction == 0 for e in tr)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2))
def test_detailed_balance_normal(x, y):
    _, _, res = mh_balance(standard_normal(2), GaussianRandomWalk(0.7), x, y)
    assert res <= 1e-12
