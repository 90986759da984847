import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from rankgossip import analytic as A
from rankgossip.fpp import percolate_regular
from rankgossip.reward import RewardSpec

LIN = RewardSpec.linear()


def test_logistic_window():
    assert A.LogisticLaw(1.0).window_width() == pytest.approx(np.log(81))
    assert A.LogisticLaw(2.0).window_width() == pytest.approx(np.log(81) / 2)


def test_nash_cg_values():
    assert A.nash_cg(LIN) == pytest.approx(0.5, abs=1e-8)
    u0 = 1 - np.exp(-1)
    # threshold reward: one atom of mass 1/u0 at u0, so theta = g(u0) / u0
    assert A.nash_cg(RewardSpec.threshold(u0)) == pytest.approx(1 / (np.e - 1), abs=1e-10)
    assert A.nash_cg(RewardSpec.constant()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("spec", [LIN, RewardSpec.threshold(0.3), RewardSpec.table([0, 0.2, 1], [3, 1, 0])])
def test_nash_cg_is_stationary(spec):
    th = A.nash_cg(spec)
    d = (A.payoff_cg(spec, th * 1.001, th) - A.payoff_cg(spec, th * 0.999, th)) / (0.002 * th)
    assert abs(d) < 1e-5
    assert A.payoff_cg(spec, th, th) == pytest.approx(spec.rbar() - th, abs=1e-9)


def test_payoff_cg_linear_closed_form():
    # linear reward: reward part is 2a/(a+1) with a = phi/theta
    for phi in (0.25, 0.5, 1.0):
        a = phi / 0.5
        assert A.payoff_cg(LIN, phi, 0.5) == pytest.approx(2 * a / (a + 1) - phi, abs=1e-10)


def test_rank_law_finite():
    p = A.rank_law_finite(50, 1.0, 1.0)
    assert p[1:].sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(p[1:], 1 / 50, atol=1e-12)
    q = A.rank_law_finite(50, 3.0, 1.0)
    assert q[1:].sum() == pytest.approx(1.0, abs=1e-12)
    assert q[2] > p[2]


def test_finite_payoff_converges_to_limit():
    ref = A.payoff_cg(LIN, 0.7, 0.5)
    errs = [abs(A.payoff_cg_finite(LIN, 0.7, 0.5, n) - ref) for n in (100, 1000, 10000)]
    assert errs[2] < errs[1] < errs[0] and errs[2] < 1e-3


@pytest.mark.parametrize("n,k", [(3, 2), (10, 2), (50, 5), (1000, 7)])
def test_nash_finite_k_against_first_order_condition(n, k):
    th, pay = A.nash_finite_k(n, k, include_source=True)
    spec = RewardSpec.threshold(k / n)

    def foc(theta):
        h = 1e-6 * theta
        return (A.payoff_cg_finite(spec, theta + h, theta, n) - A.payoff_cg_finite(spec, theta - h, theta, n)) / (2 * h)

    root = optimize.brentq(foc, 1e-3, 10.0, xtol=1e-12)
    assert th == pytest.approx(root, rel=1e-5)
    assert pay == pytest.approx(1.0 - th, rel=1e-9)


def test_nash_finite_k_small_case():
    th, pay = A.nash_finite_k(3, 2)
    assert th == pytest.approx(0.375)
    assert pay == pytest.approx(1 - 0.375)
    # large n: theta -> (k-1)/k, so the payoff tends to 1/k
    assert A.nash_finite_k(10**6, 2)[1] == pytest.approx(0.5, abs=1e-5)
    assert A.nash_finite_k(10**6, 5)[1] == pytest.approx(0.2, abs=1e-5)


def test_prob_second():
    assert A.prob_second(3, 1.0, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        A.prob_second(2, 1.0, 1.0)


@given(st.floats(0.0, 1e6))
def test_symmetric_halves(x):
    assert A.nash_symmetric(x) == x / 2


def test_audience_constant():
    assert A.nash_audience(1.0) == pytest.approx(np.pi**2 / 6 - 1, abs=1e-10)
    assert A.audience_series(1.0) == pytest.approx(np.pi**2 / 6 - 1, abs=1e-12)
    assert A.nash_audience(3.0) == pytest.approx(3 * A.audience_series(1.0), abs=1e-9)


def test_deviant_law():
    law = A.DeviantLaw(2.0, 1.0)
    assert law.rank_cdf(0.5) == pytest.approx(0.75)
    x = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(A.DeviantLaw(1.0, 1.0).cdf(x), A.LogisticLaw(1.0).cdf(x))


def test_regular_calls_against_delay_equation():
    sol = A.regular_calls_fixed_point(1.0)
    assert sol.residual < 1e-6
    ora = A.regular_calls_delay_oracle(1.0)
    x = np.linspace(-4, 4, 161)
    assert np.max(np.abs(sol(x) - ora(x))) < 5e-3
    assert sol(0.0) == pytest.approx(0.5, abs=1e-9)


def test_regular_calls_scaling_and_simulation():
    s1, s2 = A.regular_calls_fixed_point(1.0), A.regular_calls_fixed_point(2.0)
    x = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(s2(x), s1(2 * x), atol=1e-12)
    n = 20000
    t = np.sort(percolate_regular(n, 1.0, seed=4).receipt_time)
    x = t - np.median(t)
    assert np.max(np.abs(np.arange(1, n + 1) / n - s1(x))) < 0.03


def test_regular_calls_invalid():
    with pytest.raises(ValueError):
        A.regular_calls_fixed_point(0.0)
    with pytest.raises(ValueError):
        A.regular_calls_fixed_point(1.0, t_min=-2.0, t_max=2.0)
