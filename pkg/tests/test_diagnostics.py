import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from harris.core import InvalidInput, RngStream, standard_normal
from harris.diagnostics import (
    DiscreteKernel,
    Hyperplane,
    QuadConfig,
    NumericalError,
    check_drift,
    check_minorization,
    closed_classes,
    communicating_classes,
    coverage_report,
    estimate_escape,
    grid_kernel,
    hitting_probabilities,
    hitting_probability,
    hyperplane_integral,
    period,
    stationary_distribution,
    tv_exact,
    tv_period_averaged,
    tv_sequence,
    wilson_interval,
)
from harris.diagnostics.report import canonical_json, digest, make_report
from harris.pathologies import example3, example9, example9_chain, example14_chain

from conftest import ex9_total_mass


def test_kernel_validation():
    with pytest.raises(InvalidInput):
        DiscreteKernel([0, 1], np.array([[0.5, 0.4], [0, 1]]))
    with pytest.raises(InvalidInput):
        DiscreteKernel([0, 1], np.array([[1.5, -0.5], [0, 1]]))


def test_flip_chain_period_and_averaging():
    k = DiscreteKernel(["a", "b"], np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert period(k) == 2
    assert tv_exact(k, "a", 7, [0.5, 0.5]) == 0.5
    for n in range(20):
        assert tv_period_averaged(k, 2, "a", n) == 0.0


def test_stationary_and_convergence_three_state():
    P = np.array([[0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]])
    k = DiscreteKernel([0, 1, 2], P)
    pi = stationary_distribution(k)
    np.testing.assert_allclose(pi @ P, pi, atol=1e-14)
    assert period(k) == 1
    seq = dict(tv_sequence(k, 0, [0, 10, 50], pi))
    assert seq[0] > seq[10] > seq[50]
    assert seq[50] < 1e-8


def test_sparse_and_dense_agree():
    k3 = example3().truncated_kernel(300)
    kd = DiscreteKernel(k3.states, k3.dense())
    np.testing.assert_allclose(hitting_probabilities(k3, {1}), hitting_probabilities(kd, {1}), atol=1e-13)


def test_hitting_return_probability_for_start_in_A():
    k = DiscreteKernel([0, 1], np.array([[0.0, 1.0], [0.5, 0.5]]))
    assert hitting_probability(k, {0}, 0) == pytest.approx(1.0)
    k2 = DiscreteKernel([0, 1], np.array([[0.5, 0.5], [0.0, 1.0]]))
    assert hitting_probability(k2, {0}, 0) == pytest.approx(0.5)
    assert hitting_probability(k2, {0}, 1) == 0.0


def test_example3_classes():
    k = example3().truncated_kernel(50)
    cls = communicating_classes(k)
    assert [1] in closed_classes(k)
    assert len(cls) == 51


def test_tv_exact_example3_small():
    k = example3().truncated_kernel(200)
    tv = tv_exact(k, 5, 100, {1: 1.0})
    # mass still not absorbed by step 100 starting from 5: prod_{j=5}^{104} (1 - 1/j^2)
    alive = math.prod(1 - 1 / j**2 for j in range(5, 105))
    assert tv == pytest.approx(alive, abs=1e-12)


def test_minorization_hand_computed():
    P = np.array([[0.4, 0.6], [0.5, 0.5]])
    m = check_minorization(DiscreteKernel([0, 1], P), [0, 1])
    assert m.epsilon == pytest.approx(0.9, abs=1e-15)
    np.testing.assert_allclose(m.nu, [4 / 9, 5 / 9], atol=1e-15)


def test_minorization_absent():
    P = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert check_minorization(DiscreteKernel([0, 1], P), [0, 1]) is None


def test_drift_example3_exact_violation():
    ch = example3()
    res = check_drift(ch, lambda x: x, {1}, 1.0, range(2, 40))
    for r in res:
        x = r.state
        assert r.exact
        assert r.expectation == pytest.approx(x + 1 - 1 / x, abs=1e-12)
        assert not r.satisfied


def test_drift_monte_carlo_matches_exact():
    ch = example3()
    res = check_drift(ch.step, lambda x: x, {1}, 1.0, [3], budget=20_000, rng=RngStream(2, 0))
    assert abs(res[0].expectation - (3 + 1 - 1 / 3)) < 5 * res[0].std_error


def test_wilson_interval_contains_p():
    lo, hi = wilson_interval(500, 1000)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 100)[0] == 0.0


def test_escape_requires_replicas():
    with pytest.raises(InvalidInput):
        estimate_escape(example3(), lambda X: X >= 2, 2, 10, 50, seed=0)


def test_escape_reproducible():
    a = estimate_escape(example3(), lambda X: X >= 2, 2, 500, 1000, seed=8)
    b = estimate_escape(example3(), lambda X: X >= 2, 2, 500, 1000, seed=8)
    assert np.array_equal(a.exit_steps, b.exit_steps)


def test_grid_kernel_rows_and_classes():
    sub = grid_kernel(example14_chain().restrict([1]), 0.5, -5, 5, base=[0, 0.0])
    assert len(communicating_classes(sub)) == 2
    np.testing.assert_allclose(np.asarray(sub.P.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_coverage_report_from_trace():
    chain = example9_chain("deterministic")
    _, tr = chain.run([10.0, 0.0], 200, RngStream(4, 0))
    rep = coverage_report(tr, 2, checkpoints=[10, 200])
    # coordinate 2 essentially never moves off the null line from x1 = 10
    assert rep.first_accept[0, 0] > 0
    assert rep.p_dn == [1.0, 1.0]


def test_integrability_gaussian_slice_value():
    rep = hyperplane_integral(standard_normal(2), Hyperplane(2, {1: 0.0}))
    assert rep.verdict == "finite"
    assert rep.value == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-8)


def test_integrability_ex9_mass_oracle():
    target, _ = example9()
    rep = hyperplane_integral(target, Hyperplane(2, {}))
    assert rep.verdict == "finite"
    assert rep.value == pytest.approx(ex9_total_mass(), abs=1e-6)
    assert abs(ex9_total_mass() - 1) < 1e-6


def test_integrability_ex9_line_divergent():
    target, _ = example9()
    rep = hyperplane_integral(target, Hyperplane(2, {2: 0.0}))
    assert rep.verdict == "divergent"
    # on the line f = (e/2) e^{x1}, so partial integrals are (e/2)(e^{2^k} - e)
    for h, v in zip(rep.half_widths, rep.partial_integrals):
        if h <= 512:
            assert v == pytest.approx(math.e / 2 * (math.exp(h) - math.e), rel=1e-9)


def test_report_digest_stable():
    a = make_report("x", {"b": 1, "a": [1.0, 2]}, {"e": 0.5})
    b = make_report("x", {"a": [1.0, 2], "b": 1}, {"e": 0.5})
    assert canonical_json(a) == canonical_json(b)
    assert digest({"a": 1}) == digest({"a": 1})
