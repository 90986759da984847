import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from rankgossip import analytic as A
from rankgossip import nash
from rankgossip.fpp import StrategyProfile, Topology
from rankgossip.fquad import fquad_shooting_oracle
from rankgossip.reward import FiniteKReward, RewardSpec

LIN = RewardSpec.linear()
CG = Topology.complete(10000)
HALF = StrategyProfile.scalar(0.5)


@pytest.fixture(scope="module")
def ev():
    return nash.EgoPayoff(CG, LIN, HALF, 2000, seed=11)


def test_symmetric_payoff_identity(ev):
    est = ev.payoff([0.5])
    assert est.payoff == pytest.approx(1.0 - 0.5, abs=0.02)
    assert est.payoff == pytest.approx(est.reward - est.cost)
    assert est.stderr >= 0


def test_payoff_against_limit_formula(ev):
    for phi in (0.25, 0.5, 1.0):
        assert ev.value([phi]) == pytest.approx(A.payoff_cg(LIN, phi, 0.5), abs=0.02)


def test_zero_rate_gets_nothing(ev):
    est = ev.payoff([0.0])
    assert est.cost == 0.0
    # only the 1/n chance of being the source pays
    assert est.payoff == pytest.approx(0.0, abs=1e-3)


@given(st.floats(0.0, 5.0))
def test_payoff_decomposition(phi):
    e = nash.EgoPayoff(CG, LIN, HALF, 2000, seed=11).payoff([phi])
    assert e.payoff == pytest.approx(e.reward - phi, abs=1e-12)


def test_crn_and_concavity(ev):
    grid = np.linspace(0.0, 3.0, 31)
    vals = np.array([ev.value([p]) for p in grid])
    again = np.array([ev.value([p]) for p in grid])
    np.testing.assert_array_equal(vals, again)
    assert np.all(np.diff(vals, 2) <= 1e-12)


def test_payoff_mc_plain_agrees_with_conditional():
    top = Topology.complete(200)
    for phi in (0.25, 1.0):
        ego = StrategyProfile.scalar(phi)
        a = nash.payoff_mc(top, LIN, HALF, ego, 4000, seed=2)
        b = nash.payoff_mc(top, LIN, HALF, ego, 4000, seed=2, estimator="plain")
        assert a.payoff == pytest.approx(b.payoff, abs=3 * np.hypot(a.stderr, b.stderr))
        # exact finite-n value
        assert a.payoff == pytest.approx(A.payoff_cg_finite(LIN, phi, 0.5, 200), abs=4 * a.stderr + 1e-3)
    with pytest.raises(ValueError):
        nash.payoff_mc(top, LIN, HALF, HALF, 10, estimator="nope")


def test_payoff_mc_rejects_silent_population():
    with pytest.raises(ValueError):
        nash.payoff_mc(CG, LIN, StrategyProfile.scalar(0.0), HALF, 10)


def test_best_response_complete_graph(ev):
    br = nash.best_response(CG, LIN, HALF, evaluator=ev)
    assert br.phi[0] == pytest.approx(0.5, abs=0.05)
    assert br.concave
    low = nash.best_response(CG, LIN, StrategyProfile.scalar(0.1), evaluator=ev.with_theta(0.1))
    # the analytic derivative at phi = theta = 0.1 is positive, so ego calls more
    d = (A.payoff_cg(LIN, 0.101, 0.1) - A.payoff_cg(LIN, 0.099, 0.1)) / 0.002
    assert d > 0 and low.phi[0] > 0.1


def test_best_response_constant_reward():
    # with a constant reward only being last costs anything, so the best
    # response shrinks toward 0 as n grows; compare to the exact finite-n law
    for n in (100, 2000):
        top = Topology.complete(n)
        const = RewardSpec.constant()
        br = nash.best_response(top, const, HALF, replicates=2000, seed=4)
        grid = np.linspace(0.0, 2.0, 2001)
        exact = grid[np.argmax([A.payoff_cg_finite(const, p, 0.5, n) for p in grid])]
        assert br.phi[0] == pytest.approx(exact, abs=0.03)
    assert br.phi[0] < 0.2


def test_fixed_point_complete_graph():
    est = nash.nash_fixed_point(Topology.complete(2000), LIN, replicates=1000, seed=5)
    assert est.strategy[0] == pytest.approx(0.5, abs=0.05)
    assert est.classification == "wasteful"
    it = nash.nash_fixed_point(Topology.complete(2000), LIN, replicates=1000, seed=5, method="iterate")
    assert it.strategy[0] == pytest.approx(est.strategy[0], abs=2 * est.strategy_stderr[0] + 1e-3)
    assert it.residual <= 2 * it.strategy_stderr[0] + 1e-4 * it.strategy[0]


def test_fixed_point_finite_k_against_exact():
    n, k = 2000, 3
    spec = FiniteKReward(k).as_reward_spec(n)
    est = nash.nash_fixed_point(Topology.complete(n), spec, replicates=4000, seed=6)
    th, pay = A.nash_finite_k(n, k, include_source=True)
    assert est.strategy[0] == pytest.approx(th, abs=4 * est.strategy_stderr[0])
    many = nash.nash_fixed_point(Topology.complete(5000), FiniteKReward(50).as_reward_spec(5000),
                                 replicates=2000, seed=6)
    assert many.classification == "totally_wasteful"


def test_fixed_point_vector_iteration_converges():
    top = Topology.short_long(16, 50.0)
    est = nash.nash_fixed_point(top, LIN, StrategyProfile.near_far(0.2, 0.01), replicates=300, seed=7)
    assert est.strategy.shape == (2,)
    assert np.all(est.strategy >= 0)
    assert len(est.trace) == est.iterations


@given(st.floats(0.0, 2.0), st.floats(0.0, 0.5), st.floats(0.5, 2.0))
def test_classification_trichotomy(payoff, se, rbar):
    label, flag = nash.classify(payoff, se, rbar)
    assert label in nash.CLASSES
    margin = max(2 * se, 0.05 * rbar)
    eff, waste = rbar - payoff <= margin, payoff <= margin
    if eff and waste:
        assert label == "wasteful" and flag
    elif eff:
        assert label == "efficient"
    elif waste:
        assert label == "totally_wasteful"
    else:
        assert label == "wasteful"


def test_classify_ladder():
    def est(cost):
        return nash.NashEstimate(np.array([cost]), np.array([0.0]), 1 - cost, 1e-4, 1.0, "", False, 0, 1)

    lad = nash.classify_ladder([32, 64, 128], [est(0.12), est(0.06), est(0.03)])
    assert lad["classification"] == "efficient"
    flat = nash.classify_ladder([32, 64, 128], [est(0.5), est(0.5), est(0.5)])
    assert flat["classification"] == "wasteful"


def test_short_long_constants_against_ode_oracle():
    # linear reward: r = 2 du, so K1 = 2 int (1-F) G F' dt and K2 = 2 int F'^2 dt
    K1, K2 = nash.short_long_constants(LIN)
    t, F = fquad_shooting_oracle(1.0)
    dF = np.gradient(F, t)
    a = 2 ** (1 / 3)
    G = F[0] / a + np.concatenate([[0], np.cumsum(0.5 * (F[1:] + F[:-1]) * np.diff(t))])
    assert K1 == pytest.approx(2 * integrate.trapezoid((1 - F) * G * dF, t), rel=1e-3)
    assert K2 == pytest.approx(2 * integrate.trapezoid(dF * dF, t), rel=1e-3)


def test_short_long_limit_orders():
    cs = np.array([1e2, 1e3, 1e4])
    res = [nash.nash_short_long(LIN, c, 18.94 / 16, -0.448 * 4) for c in cs]
    far = np.array([r.theta_far for r in res])
    near = np.array([r.theta_near for r in res])
    assert np.polyfit(np.log(cs), np.log(far), 1)[0] == pytest.approx(-2, abs=0.1)
    assert np.polyfit(np.log(cs), np.log([r.window_width for r in res]), 1)[0] == pytest.approx(1, abs=0.15)
    assert np.polyfit(np.log(cs), np.log([r.cost for r in res]), 1)[0] == pytest.approx(-0.5, abs=0.05)
    assert np.all(np.diff(far / near) < 0)
    r = res[0]
    assert r.theta_near == pytest.approx(np.sqrt(r.Q / r.c_N))
    assert r.Q == pytest.approx(abs(r.dz1) * r.K1 * r.K2)
    with pytest.raises(ValueError):
        nash.nash_short_long(LIN, 0.5, 1.0, -1.0)
    with pytest.raises(ValueError):
        nash.nash_short_long(LIN, 1e5, 1.0, -1.0, N=64)


def test_far_calls_switch_off_when_too_expensive():
    # c_N far above N^2: calling far is never worth it
    N = 16
    top = Topology.short_long(N, 1e4)
    prof = StrategyProfile.near_far(0.25, 1e-4)
    ev = nash.EgoPayoff(top, LIN, prof, 400, seed=8)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        br = nash.best_response(top, LIN, prof, evaluator=ev)
    se = ev.strategy_stderr(br.phi)
    assert br.phi[1] <= 2 * se[1] or br.phi[1] == 0.0
    assert br.phi[0] > 0


def test_distance_cost_efficiency():
    rep = nash.distance_cost_efficiency(LIN, lambda d: d * d, [32, 64], seed=0, replicates=200)
    rows = rep["rows"]
    assert rows[1]["cost"] < rows[0]["cost"]
    assert rows[0]["d_star"] == rows[1]["d_star"]
    assert rows[1]["window_width"] > rows[0]["window_width"]
    flat = nash.distance_cost_efficiency(LIN, lambda d: 1.0, [32], seed=0, replicates=200)
    assert flat["rows"][0]["cost"] > 0.3
