import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onewaybf.bayes_factor import (
    Method,
    Model,
    ModelParams,
    PearsonTypeVI,
    closed_form_log_bf,
    closed_form_log_bf_ratio,
    decide,
    pearson_vi_log_pdf,
    posterior_prob_m1,
    quadrature_log_bf,
    quadrature_log_bf_ratio,
)
from onewaybf.core_math import integrate_unit_interval
from onewaybf.data import BalancedDesign, DataMatrix, SufficientStats, sufficient_stats
from onewaybf.errors import DegenerateData, DomainError, HyperparameterOutOfRange

D22 = BalancedDesign(2, 2)


def stats_with_ratio(design, ratio, w_t=1.0):
    w_e = ratio * w_t
    return SufficientStats(w_t - w_e, w_e, w_t, 0.0, np.zeros(design.p), design)


def mp_log_bf(design, prior, ratio):
    """Independent oracle: the tau-integral evaluated with mpmath at 30 digits."""
    n, p, r = design.n, design.p, design.r
    a, b, k = (mpmath.mpf(x) for x in (prior.alpha, prior.beta, prior.kappa))
    with mpmath.workdps(30):
        norm = mpmath.beta(a + 1, b + 1)

        def f(t):
            return (
                (1 + r * t) ** (mpmath.mpf(n - p) / 2)
                * (1 + r * t * ratio) ** (-mpmath.mpf(n - 1) / 2)
                * k * (k * t) ** b * (1 + k * t) ** (-a - b - 2) / norm
            )

        return float(mpmath.log(mpmath.quad(f, [0, 1e-6, 1e-3, 1, 1e3, mpmath.inf])))


def test_closed_form_hand_examples():
    res = closed_form_log_bf(stats_with_ratio(D22, 1.0), -0.5)
    assert res.bf10 == pytest.approx(2 / math.pi, rel=1e-12)
    assert res.decision is Model.M0 and res.method is Method.CLOSED_FORM
    res = closed_form_log_bf(sufficient_stats(DataMatrix.from_array([[0, 2], [2, 4]])), -0.5)
    assert res.bf10 == pytest.approx(2 * math.sqrt(2) / math.pi, rel=1e-12)
    assert res.decision is Model.M0


def test_closed_form_matches_independent_oracle():
    for (p, r, a, ratio) in [(2, 2, -0.5, 0.5), (3, 5, -0.25, 0.7), (10, 4, -0.1, 0.55), (6, 30, -0.2, 0.93)]:
        d = BalancedDesign(p, r)
        prior = PearsonTypeVI.closed_form(d, a)
        assert closed_form_log_bf_ratio(d, a, ratio) == pytest.approx(mp_log_bf(d, prior, ratio), abs=1e-9)


@pytest.mark.parametrize(
    "p, r, prior, ratio",
    [
        (2, 5, PearsonTypeVI(-0.5, 0.0, 1.0), 0.4),
        (2, 5, PearsonTypeVI(-0.5, 0.0, 0.1), 0.8),
        (3, 4, PearsonTypeVI(0.0, -0.5, 1.0), 0.3),
        (4, 6, PearsonTypeVI(0.0, 0.0, 6.0), 0.9),
        (5, 3, PearsonTypeVI(2.0, 3.5, 0.2), 0.6),
    ],
)
def test_quadrature_matches_independent_oracle(p, r, prior, ratio):
    d = BalancedDesign(p, r)
    assert quadrature_log_bf_ratio(d, prior, ratio) == pytest.approx(mp_log_bf(d, prior, ratio), abs=1e-7)


def test_degenerate_cases():
    res = closed_form_log_bf(stats_with_ratio(BalancedDesign(3, 4), 0.0), -0.5)
    assert res.log_bf10 == math.inf and res.bf10 == math.inf
    assert res.decision is Model.M1 and res.degenerate and res.posterior_prob_m1 == 1.0
    with pytest.raises(DegenerateData):
        closed_form_log_bf(sufficient_stats(DataMatrix.from_array(np.ones((3, 3)))))
    with pytest.raises(DegenerateData):
        quadrature_log_bf(sufficient_stats(DataMatrix.from_array(np.ones((3, 3)))), PearsonTypeVI(0, 0, 1))
    q = quadrature_log_bf(stats_with_ratio(BalancedDesign(3, 4), 0.0), PearsonTypeVI(-0.5, 0.0, 1.0))
    assert q.log_bf10 == math.inf and q.degenerate


def test_hyperparameter_validation():
    with pytest.raises(HyperparameterOutOfRange, match="beta=-1"):
        closed_form_log_bf(stats_with_ratio(D22, 0.5), alpha=0.0)
    with pytest.raises(HyperparameterOutOfRange):
        closed_form_log_bf(stats_with_ratio(D22, 0.5), alpha=-1.0)
    for bad in [(-1, 0, 1), (0, -1, 1), (0, 0, 0), (0, 0, math.inf)]:
        with pytest.raises(HyperparameterOutOfRange):
            PearsonTypeVI(*bad)
    with pytest.raises(DomainError):
        ModelParams(sigma2=0.0)
    with pytest.raises(DomainError):
        ModelParams(sigma_a2=-1.0)


def test_pearson_vi_examples():
    assert pearson_vi_log_pdf(1.0, PearsonTypeVI(0, 0, 1)) == pytest.approx(math.log(0.25), abs=1e-14)
    assert pearson_vi_log_pdf(2.0, PearsonTypeVI(-0.5, 0, 1)) == pytest.approx(math.log(3**-1.5 / 2), abs=1e-14)
    tau = np.array([0.01, 0.1, 1, 10, 100])
    np.testing.assert_allclose(pearson_vi_log_pdf(tau, PearsonTypeVI(0, 0, 1)), -2 * np.log1p(tau), atol=1e-12, rtol=0)
    with pytest.raises(DomainError):
        pearson_vi_log_pdf(0.0, PearsonTypeVI(0, 0, 1))


def test_pearson_vi_normalization_random():
    rng = np.random.default_rng(2)
    for _ in range(20):
        prior = PearsonTypeVI(rng.uniform(-0.9, 5), rng.uniform(-0.9, 5), math.exp(rng.uniform(-4, 4)))

        def logf(u):
            tau = u / (1 - u) / prior.kappa
            return pearson_vi_log_pdf(tau, prior) - 2 * np.log1p(-u) - math.log(prior.kappa)

        assert integrate_unit_interval(logf).log_magnitude == pytest.approx(0.0, abs=1e-7)


def test_prior_mode():
    prior = PearsonTypeVI(-0.25, 3.0, 2.0)
    tau = np.geomspace(1e-3, 1e3, 200001)
    assert prior.mode() == pytest.approx(tau[np.argmax(pearson_vi_log_pdf(tau, prior))], rel=1e-3)
    assert PearsonTypeVI(0, -0.5, 1).mode() == 0.0


@pytest.mark.parametrize("p, r", [(2, 5), (2, 100), (5, 2), (50, 20)])
def test_wg_configuration_finite(p, r):
    d = BalancedDesign(p, r)
    for ratio in (1e-6, 0.3, 0.999, 1.0):
        assert math.isfinite(quadrature_log_bf_ratio(d, PearsonTypeVI(-0.5, 0.0, 1.0), ratio))


def test_no_between_group_variation_favors_m0():
    for p, r in [(2, 2), (4, 7), (30, 3)]:
        d = BalancedDesign(p, r)
        for prior in (PearsonTypeVI(0, 0, 1), PearsonTypeVI(-0.5, 0, r), PearsonTypeVI(1.5, -0.5, 0.1)):
            assert quadrature_log_bf_ratio(d, prior, 1.0) < 0


def test_posterior_prob_examples():
    assert posterior_prob_m1(0.0) == 0.5
    assert posterior_prob_m1(math.inf) == 1.0
    assert posterior_prob_m1(math.log(3)) == pytest.approx(0.75, abs=1e-15)
    assert posterior_prob_m1(-1000.0) == pytest.approx(0.0, abs=1e-300)
    assert posterior_prob_m1(0.0, 0.2) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(DomainError):
        posterior_prob_m1(0.0, 1.0)


@given(st.floats(-700, 700))
def test_posterior_prob_equals_bf_over_one_plus_bf(lb):
    bf = math.exp(lb)
    assert posterior_prob_m1(lb) == pytest.approx(bf / (1 + bf), rel=1e-12, abs=1e-300)


def test_decision_boundary_is_strict():
    assert decide(0.0) is Model.M0
    assert decide(5e-324) is Model.M1
    assert decide(-5e-324) is Model.M0


def test_decision_at_exact_unit_bf():
    # Choose W_E/W_T so that the closed-form BF is as close to 1 as floating point allows.
    d = BalancedDesign(3, 3)
    a = -0.5
    const = closed_form_log_bf_ratio(d, a, 1.0)
    expo = a - (d.n - d.p - 2) / 2
    ratio = math.exp(-const / expo)
    lb = closed_form_log_bf_ratio(d, a, ratio)
    assert abs(lb) < 1e-14
    assert decide(lb) is (Model.M1 if lb > 0 else Model.M0)


@settings(max_examples=200)
@given(
    st.integers(2, 20), st.integers(2, 20), st.sampled_from([-0.5, -0.25, -0.2, -0.1]),
    st.floats(0.01, 0.99), st.floats(0.01, 0.99),
)
def test_closed_form_monotone_in_ratio(p, r, a, x, y):
    d = BalancedDesign(p, r)
    if x == y or not d.n - d.p - 2 > 2 * a:
        return
    lo, hi = min(x, y), max(x, y)
    assert closed_form_log_bf_ratio(d, a, lo) > closed_form_log_bf_ratio(d, a, hi)


def test_affine_invariance_random():
    rng = np.random.default_rng(17)
    for _ in range(200):
        p, r = rng.integers(2, 15, size=2)
        y = rng.normal(size=(p, r)) + rng.normal(0, 2, (p, 1))
        a = rng.choice([-1, 1]) * math.exp(rng.uniform(-5, 5))
        b = rng.normal(0, 100)
        base = closed_form_log_bf(sufficient_stats(DataMatrix.from_array(y)))
        moved = closed_form_log_bf(sufficient_stats(DataMatrix.from_array(a * y + b)))
        assert abs(moved.log_bf10 - base.log_bf10) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50), st.integers(2, 50), st.sampled_from([-0.5, -0.25, -0.2, -0.1]), st.floats(0.02, 1.0))
def test_quadrature_agrees_with_closed_form(p, r, a, ratio):
    d = BalancedDesign(p, r)
    prior = PearsonTypeVI.closed_form(d, a)
    assert quadrature_log_bf_ratio(d, prior, ratio) == pytest.approx(closed_form_log_bf_ratio(d, a, ratio), abs=1e-6)


def test_result_serialization():
    res = closed_form_log_bf(stats_with_ratio(D22, 0.5))
    d = res.to_dict()
    assert d["method"] == "ClosedForm" and d["decision"] == "M0"
    assert set(d) == {"log_bf10", "bf10", "posterior_prob_m1", "method", "decision", "degenerate"}


def test_large_design_saturates_bf_not_log_bf():
    d = BalancedDesign(1000, 10)
    lb = closed_form_log_bf_ratio(d, -0.5, 0.5)
    assert math.isfinite(lb) and lb > 709
    assert closed_form_log_bf(stats_with_ratio(d, 0.5)).bf10 == math.inf
