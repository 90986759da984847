"""Acceptance criteria, one test each, at their stated tolerances.

Each test records a one-line PASS/FAIL summary that is printed at the end
of the pytest run (see conftest.py).
"""

import filecmp
import time

import numpy as np
import yaml
from hypothesis import given, strategies as st

from rankgossip import analytic as A
from rankgossip import cli, lattice, nash
from rankgossip.fpp import EgoDeviation, StrategyProfile, Topology, ego_rank_distribution, percolate
from rankgossip.fquad import left_tail_rate, solve_fquad
from rankgossip.parallel import map_ordered
from rankgossip.reward import FiniteKReward, RewardSpec
from rankgossip.scaling import window_sweep
from rankgossip.seeding import replicate_seeds

LIN = RewardSpec.linear()


def check(record, number, ok, detail):
    record(number, bool(ok), detail)
    assert ok, detail


def test_01_complete_graph_nash(acceptance_line):
    exact = A.nash_cg(LIN)
    t0 = time.perf_counter()
    est = nash.nash_fixed_point(Topology.complete(10**4), LIN, replicates=2000, seed=1)
    dt = time.perf_counter() - t0
    ok = abs(exact - 0.5) <= 1e-8 and abs(est.strategy[0] - 0.5) <= 0.05 and dt < 300
    check(acceptance_line, 1, ok,
          f"nash_cg(linear)={exact:.12f}; simulated theta*={est.strategy[0]:.4f} "
          f"+- {est.strategy_stderr[0]:.1e} ({est.classification}) in {dt:.0f}s")


def test_02_logistic_limit(acceptance_line):
    n, reps = 10**5, 200
    top, one = Topology.complete(n), StrategyProfile.scalar(1.0)
    t0 = time.perf_counter()

    def recentered(s):
        t = percolate(top, one, seed=int(s)).receipt_time
        return t - np.median(t)

    x = np.sort(np.concatenate(map_ordered(recentered, replicate_seeds(2, reps, stream=50), None)))
    dt = time.perf_counter() - t0
    emp = np.arange(1, x.size + 1) / x.size
    ks = float(np.max(np.abs(emp - A.LogisticLaw(1.0).cdf(x))))
    check(acceptance_line, 2, ks < 0.02 and dt < 600,
          f"KS(recentered receipt times, logistic) = {ks:.4f} over {reps} runs of n={n} in {dt:.0f}s")


def test_03_deviant_rank_law(acceptance_line):
    u = ego_rank_distribution(Topology.complete(10**4), StrategyProfile.scalar(1.0),
                              EgoDeviation(0, StrategyProfile.scalar(2.0)), 10**4, seed=3)
    errs = {q: abs(np.mean(u <= q) - (1 - (1 - q) ** 2)) for q in (0.25, 0.5, 0.75)}
    check(acceptance_line, 3, max(errs.values()) <= 0.02,
          "P(rank/n <= u) errors " + ", ".join(f"u={q}: {e:.4f}" for q, e in errs.items()))


def test_04_finite_k(acceptance_line):
    n = 10**4
    res = {}
    for k, target in ((2, 0.5), (5, 0.2)):
        est = nash.nash_fixed_point(Topology.complete(n), FiniteKReward(k).as_reward_spec(n),
                                    replicates=10**4, seed=4)
        res[k] = (est.payoff, est.payoff_stderr, target)
    ok = all(abs(p - t) <= 0.03 for p, _, t in res.values())
    check(acceptance_line, 4, ok,
          "; ".join(f"k={k}: payoff {p:.4f} +- {s:.4f} (target {t})" for k, (p, s, t) in res.items()))


def test_05_torus_efficiency(acceptance_line):
    sizes = [32, 64, 128]
    t0 = time.perf_counter()
    ests = [nash.nash_fixed_point(Topology.torus_nn(N), LIN, replicates=400, seed=5) for N in sizes]
    dt = time.perf_counter() - t0
    tn = np.array([e.strategy[0] * N for e, N in zip(ests, sizes)])
    spread = float(np.max(np.abs(tn / tn.mean() - 1)))
    lad = nash.classify_ladder(sizes, ests)
    ok = spread <= 0.2 and lad["classification"] == "efficient" and dt < 1800
    check(acceptance_line, 5, ok,
          f"theta*N = {np.round(tn, 3).tolist()} (max deviation {spread:.1%}), slope {lad['slope']:.3f}, "
          f"{lad['classification']}, {dt:.0f}s")


def test_06_uniform_rank(acceptance_line):
    r = lattice.uniform_rank_check(128, 10**4, seed=6)
    nb = lattice.uniform_rank_check(128, 10**4, seed=6, at="first_neighbor")
    check(acceptance_line, 6, r.ks < 0.03,
          f"KS(origin wetting count / N^2, uniform) = {r.ks:.4f} at N=128; "
          f"first-neighbor count (finite-N biased) KS = {nb.ks:.4f}")


def test_07_fquad(acceptance_line):
    s1, s8 = solve_fquad(1.0), solve_fquad(8.0)
    x = np.linspace(-5, 3, 801)
    sup = float(np.max(np.abs(s8(x) - s1(8 ** (1 / 3) * x))))
    mask = (s1.F > 1e-9) & (s1.F < 1e-4)
    slope = float(np.polyfit(s1.t[mask], np.log(s1.F[mask]), 1)[0])
    rel = abs(slope / left_tail_rate(1.0) - 1)
    ok = sup < 1e-3 and s1.residual < 1e-6 and s8.residual < 1e-6 and rel < 0.02
    check(acceptance_line, 7, ok,
          f"lambda-scaling sup error {sup:.2e}; residual {max(s1.residual, s8.residual):.1e}; "
          f"left-tail exponent {slope:.5f} vs 2^(1/3) ({rel:.2%})")


def test_08_short_long_window_scaling(acceptance_line):
    t0 = time.perf_counter()
    near = window_sweep(512, "near", far=1e-3, runs=4, seed=8)
    far = window_sweep(512, "far", near=1.0, far=1e-3, runs=4, seed=8)
    dt = time.perf_counter() - t0
    ok = (abs(near.fit.slope + 2 / 3) <= 0.07 and abs(far.fit.slope + 1 / 3) <= 0.07
          and near.rates.size == 9 and far.rates.size == 9 and dt < 3600)
    check(acceptance_line, 8, ok,
          f"slopes: theta_near {near.fit.slope:.3f} (target -2/3), theta_far {far.fit.slope:.3f} "
          f"(target -1/3) at N=512, 9 points each, {dt:.0f}s")


def test_09_coupling(acceptance_line):
    taus = lattice.sample_tau(32, 1000, seed=9)
    z = lattice.estimate_z(taus, seed=9)
    Z, lam = z.samples, z.lambdas
    z1_zero = bool(np.all(Z[:, lam == 1.0] == 0.0))
    mono = float(np.mean(np.all(np.diff(Z, axis=1) <= 0.0, axis=1)))
    m = 10**5
    zero = lattice.TauSample(np.zeros((m, 4)), np.zeros(m), np.zeros(m), 32.0)
    d0 = lattice.estimate_z(zero, seed=9)
    ok = (z1_zero and mono == 1.0 and z.dz1 + 3 * z.dz1_stderr < 0
          and abs(d0.dz1 + 0.25) <= 2 * d0.dz1_stderr)
    check(acceptance_line, 9, ok,
          f"Z(1)=0: {z1_zero}; monotone paths {mono:.0%}; z'(1) = {z.dz1:.4f} +- {z.dz1_stderr:.4f}; "
          f"tau=0 gives {d0.dz1:.4f} +- {d0.dz1_stderr:.4f} vs -1/4")


@given(st.floats(0.0, 1e9, allow_nan=False))
def _halves(x):
    assert A.nash_symmetric(x) == x / 2


def test_10_symmetric_and_audience(acceptance_line):
    _halves()
    quad, series = A.nash_audience(1.0), A.audience_series(1.0)
    target = np.pi**2 / 6 - 1
    ok = abs(quad - target) <= 1e-8 and abs(quad - series) <= 1e-8
    check(acceptance_line, 10, ok,
          f"nash_symmetric halves exactly; nash_audience(1) = {quad:.12f}, series {series:.12f}, "
          f"pi^2/6-1 = {target:.12f}")


EXPERIMENTS = {
    "simulate_complete": {"kind": "simulate", "replicates": 4, "topology": {"kind": "complete", "size": 3000},
                          "strategy": [1.0], "ego": [2.0]},
    "simulate_distance": {"kind": "simulate", "replicates": 3,
                          "topology": {"kind": "distance_cost", "size": 20, "cost_power": 2},
                          "strategy": [1.0, 0.2]},
    "nash_torus": {"kind": "nash", "replicates": 200, "topology": {"kind": "torus_nn", "size": 16},
                   "reward": {"family": "linear"}},
    "nash_short_long": {"kind": "nash", "replicates": 100, "topology": {"kind": "short_long", "size": 12,
                                                                         "c_far": 20},
                        "reward": {"family": "linear"}, "strategy": [0.3, 0.01]},
    "lattice_z": {"kind": "lattice", "replicates": 200, "params": {"task": "z", "r": 8}},
    "fquad": {"kind": "fquad", "params": {"lam": 2.0}},
    "sweep": {"kind": "sweep", "params": {"base": {"kind": "simulate", "replicates": 2,
                                                     "topology": {"kind": "torus_nn", "size": 16},
                                                     "strategy": [1.0]},
                                            "vary": "topology.size", "values": [8, 16], "y": "width_mean"}},
}


def test_11_determinism(acceptance_line, tmp_path):
    bad = []
    for name, exp in EXPERIMENTS.items():
        cfg = tmp_path / f"{name}.yaml"
        cfg.write_text(yaml.safe_dump(dict(exp, seed=11)))
        dirs = []
        for threads in (1, 4):
            out = tmp_path / f"{name}-{threads}"
            assert cli.main(["run", str(cfg), "--out", str(out), "--threads", str(threads)]) == 0
            dirs.append(out)
        cmp = filecmp.dircmp(dirs[0], dirs[1])
        files = sorted(p.relative_to(dirs[0]).as_posix() for p in dirs[0].rglob("*") if p.is_file())
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
        if mismatch or errors or cmp.left_only or cmp.right_only:
            bad.append(name)
    check(acceptance_line, 11, not bad,
          f"{len(EXPERIMENTS)} experiments rerun with 1 and 4 threads: "
          + ("all outputs byte-identical" if not bad else f"differences in {bad}"))
