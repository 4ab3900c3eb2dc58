import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harris.core import InvalidInput, RngStream, TargetDensity
from harris.diagnostics.balance import coord_balance
from harris.mwg import (
    CoordinateKernel,
    MetropolisWithinGibbs,
    NormalCoordinate,
    ScanSchedule,
    UniformCoordinate,
    coord_acceptance_log,
    gibbs_conditional_proposal,
    restrict_subchain,
)
from harris.pathologies import example9, example14, example14_chain


def bivariate_normal(rho):
    det = 1 - rho * rho
    c = -math.log(2 * math.pi) - 0.5 * math.log(det)

    def log_f(x):
        return c - (x[0] ** 2 - 2 * rho * x[0] * x[1] + x[1] ** 2) / (2 * det)

    def log_f_batch(X):
        return c - (X[:, 0] ** 2 - 2 * rho * X[:, 0] * X[:, 1] + X[:, 1] ** 2) / (2 * det)

    return TargetDensity(2, log_f, log_f_batch, name="bvn")


def gibbs_proposals(rho):
    sd = math.sqrt(1 - rho * rho)
    out = []
    for i in (1, 2):
        other = 1 - (i - 1)

        def sampler(x, rng, o=other):
            return rho * x[o] + sd * float(rng.normal())

        def log_cond(x, z, o=other):
            return -0.5 * math.log(2 * math.pi * sd * sd) - (z - rho * x[o]) ** 2 / (2 * sd * sd)

        out.append(gibbs_conditional_proposal(i, sampler, log_cond))
    return out


def test_deterministic_scan_cycles():
    s = ScanSchedule("deterministic", 3)
    assert [s.index(n) for n in range(1, 8)] == [1, 2, 3, 1, 2, 3, 1]


def test_random_scan_uniform():
    s = ScanSchedule("random", 2)
    rng = RngStream(3, 0)
    picks = [s.index(n, rng) for n in range(1, 10_001)]
    assert set(picks) == {1, 2}
    assert abs(np.mean(np.array(picks) == 1) - 0.5) < 0.02


def test_bad_scan_kind():
    with pytest.raises(InvalidInput):
        ScanSchedule("sweep", 2)


def test_restrict_subchain_only_moves_selected():
    chain = example14_chain().restrict([1])
    _, tr = chain.run([4.5, 0.0], 500, RngStream(1, 0))
    assert {e.direction for e in tr} == {1}
    assert all(e.state[1] == 0.0 for e in tr)


def test_restrict_subchain_errors():
    _, props = example9()
    with pytest.raises(InvalidInput):
        restrict_subchain(props, [])
    with pytest.raises(InvalidInput):
        restrict_subchain(props, [3])


def test_ex9_decrease_acceptance_is_exp_minus_delta():
    target, (p1, _) = example9()
    for x1 in (2.0, 5.0, 10.0):
        for delta in (0.01, 0.3, 0.5):
            la = coord_acceptance_log(target, p1, [x1, 0.0], x1 - delta)
            assert abs(math.exp(la) - math.exp(-delta)) <= 1e-10


def test_ex9_off_line_move_almost_never_accepted():
    target, (_, p2) = example9()
    assert coord_acceptance_log(target, p2, [10.0, 0.0], 0.5) < -1e8


def test_gibbs_alpha_is_one():
    target = bivariate_normal(0.5)
    props = gibbs_proposals(0.5)
    rng = RngStream(4, 0)
    for _ in range(500):
        x = rng.normal(size=2)
        for cp in props:
            z = cp.sample_z(x, rng)
            assert abs(coord_acceptance_log(target, cp, x, z)) < 1e-9


def test_coordinate_kernel_is_degenerate_off_line():
    ck = CoordinateKernel(NormalCoordinate(1, 1.0))
    assert ck.log_q([0.0, 0.0], [1.0, 1.0]) == -math.inf
    assert ck.log_q([0.0, 0.0], [1.0, 0.0]) == pytest.approx(-0.5 - 0.5 * math.log(2 * math.pi))


def test_batch_step_agrees_with_scalar_acceptance():
    chain = example14_chain()
    X = chain.initial([4.5, 0.0], 2000)
    gen = RngStream(5, 0).generator
    for n in range(1, 50):
        X, d, acc = chain.step_batch_detailed(X, n, gen)
    r2 = (X ** 2).sum(axis=1)
    assert np.all((r2 > 16) & (r2 < 25))


def test_uniform_coordinate_density():
    cp = UniformCoordinate(2, 1.0)
    assert cp.log_q(np.array([0.0, 0.0]), 0.5) == pytest.approx(math.log(0.5))
    assert cp.log_q(np.array([0.0, 0.0]), 1.5) == -math.inf


coords = st.floats(-6, 6)


@settings(max_examples=300, deadline=None)
@given(coords, coords, coords, st.sampled_from([0, 1]))
def test_ex14_coordinate_balance(x1, x2, z, slot):
    target, props = example14()
    _, _, res = coord_balance(target, props[slot], [x1, x2], z)
    assert res <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(1.0001, 12), st.floats(-1e-3, 1e-3), st.floats(-2, 12), st.sampled_from([0, 1]))
def test_ex9_coordinate_balance(x1, x2, z, slot):
    target, props = example9()
    _, _, res = coord_balance(target, props[slot], [x1, x2], z)
    assert res <= 1e-12
