"""Empirical Nash equilibria from simulated best responses.

Ego's payoff against a fixed population strategy is estimated from
ego-free percolation paths (see ``fpp.ego_free_paths``): on each path ego's
expected reward is computed exactly for any calling rates, so payoffs at
different ego strategies share all randomness and are smooth and concave
in ego's rates.  The best response is then an ordinary 1-d or box-bounded
optimization, and equilibria come from damped best-response iteration.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .fpp import EgoDeviation, StrategyProfile, Topology, ego_free_paths, percolate, spread_stats
from .fpp.topology import torus_max_distance
from .fquad import FquadSolution, solve_fquad
from .reward import RewardSpec
from .scaling import loglog_slope
from .seeding import replicate_seeds
from . import parallel

__all__ = [
    "PayoffEstimate",
    "EgoPayoff",
    "payoff_mc",
    "BestResponse",
    "best_response",
    "NashEstimate",
    "nash_fixed_point",
    "classify",
    "classify_ladder",
    "ShortLongNash",
    "short_long_constants",
    "nash_short_long",
    "distance_cost_efficiency",
]

CLASSES = ("efficient", "wasteful", "totally_wasteful")


@dataclass
class PayoffEstimate:
    """Ego's payoff per item: ``payoff = reward - cost``."""

    payoff: float
    stderr: float
    replicates: int
    cost: float
    reward: float


@lru_cache(maxsize=2)
def _paths(topology, profile, replicates, seed, max_rank, ego_len, threads):
    return ego_free_paths(topology, profile, replicates, seed, threads=threads,
                          max_rank=max_rank, ego_len=ego_len)


class EgoPayoff:
    """Ego's payoff as a function of its own rates, population strategy fixed.

    All evaluations reuse one set of ego-free paths.  For the complete
    graph and the nearest-neighbor torus the paths are drawn at unit rate,
    so ``with_theta`` changes the population rate without resimulating.
    """

    def __init__(self, topology: Topology, spec: RewardSpec, profile: StrategyProfile,
                 replicates: int = 1000, seed: int = 0, *, threads: int | None = None,
                 ego_len: int | None = None):
        topology.check_profile(profile)
        if replicates < 2:
            raise ValueError("need at least 2 replicates")
        self.topology = topology
        self.spec = spec
        self.profile = profile
        self.n = topology.n_agents
        self.rtab = spec.rank_table(self.n)
        nz = np.flatnonzero(self.rtab > 0)
        max_rank = int(nz[-1]) if nz.size else 1
        self.scalar = topology.kind in ("complete", "torus_nn")
        self.ego_len = len(profile.rates) if ego_len is None else int(ego_len)
        sim = StrategyProfile.scalar(1.0) if self.scalar else profile
        self.batch = _paths(topology, sim, int(replicates), int(seed), max_rank, self.ego_len, threads)
        self.costs = topology.channel_costs(self.ego_len)
        self.replicates = int(replicates)
        self.seed = int(seed)

    @property
    def theta(self) -> float:
        return self.profile.rates[0]

    def with_theta(self, theta: float) -> "EgoPayoff":
        if not self.scalar:
            raise TypeError("only scalar-rate topologies can be rescaled without resimulating")
        new = object.__new__(EgoPayoff)
        new.__dict__.update(self.__dict__)
        new.profile = StrategyProfile.scalar(theta)
        return new

    def _scale(self):
        return self.theta if self.scalar else 1.0

    def reward(self, phi, want_grad: bool = False):
        """Mean reward, its stderr and (optionally) per-path gradients in ``phi``."""
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        if np.any(phi < 0):
            raise ValueError("ego rates must be nonnegative")
        sc = self._scale()
        out, grad = self.batch.conditional_reward(self.rtab, phi / sc, want_grad)
        w = 1.0 - 1.0 / self.n
        m = out.size
        mean = self.rtab[1] / self.n + w * out.mean()
        se = w * out.std(ddof=1) / np.sqrt(m)
        if not want_grad:
            return mean, se, None
        return mean, se, w * grad / sc

    def payoff(self, phi) -> PayoffEstimate:
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        mean, se, _ = self.reward(phi)
        cost = float(phi @ self.costs)
        return PayoffEstimate(float(mean - cost), float(se), self.replicates, cost, float(mean))

    def value(self, phi) -> float:
        return self.payoff(phi).payoff

    def gradient(self, phi):
        """Payoff gradient and its per-coordinate stderr."""
        _, _, g = self.reward(phi, True)
        m = g.shape[0]
        return g.mean(axis=0) - self.costs, g.std(axis=0, ddof=1) / np.sqrt(m)

    def gain(self, phi, base):
        """Payoff of ``phi`` minus payoff of ``base`` and its paired stderr."""
        sc = self._scale()
        a, _ = self.batch.conditional_reward(self.rtab, np.atleast_1d(np.asarray(phi, float)) / sc, False)
        b, _ = self.batch.conditional_reward(self.rtab, np.atleast_1d(np.asarray(base, float)) / sc, False)
        w = 1.0 - 1.0 / self.n
        d = w * (a - b)
        dc = (np.asarray(phi, float) - np.asarray(base, float)) @ self.costs
        return float(d.mean() - dc), float(d.std(ddof=1) / np.sqrt(d.size))

    def strategy_stderr(self, phi, rel_step: float = 1e-2) -> np.ndarray:
        """Statistical uncertainty of a stationary point, per coordinate.

        The stderr of the payoff derivative is divided by the local
        curvature (diagonal, by central differences of the gradient).
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        _, gse = self.gradient(phi)
        out = np.empty(phi.size)
        for g in range(phi.size):
            eps = rel_step * max(phi[g], 1e-3 * max(phi.max(), 1e-6))
            up, dn = phi.copy(), phi.copy()
            up[g] += eps
            dn[g] = max(dn[g] - eps, 0.0)
            curv = (self.gradient(up)[0][g] - self.gradient(dn)[0][g]) / (up[g] - dn[g])
            out[g] = gse[g] / abs(curv) if curv < 0 else np.inf
        return out


def payoff_mc(topology: Topology, spec: RewardSpec, profile: StrategyProfile,
              ego_profile: StrategyProfile, replicates: int = 1000, seed: int = 0, *,
              estimator: str = "conditional", threads: int | None = None) -> PayoffEstimate:
    """Monte-Carlo payoff to one agent using ``ego_profile`` against ``profile``.

    ``estimator="conditional"`` integrates ego's receipt analytically along
    ego-free paths; ``"plain"`` simulates ego's receipt and averages
    ``R(rank / n)`` (0 if ego never learns).  Both use common random
    numbers: the same seed gives the same population randomness for every
    ego strategy.
    """
    topology.check_profile(profile)
    topology.check_profile(ego_profile, allow_zero=True)
    if estimator == "conditional":
        ev = EgoPayoff(topology, spec, profile, replicates, seed, threads=threads,
                       ego_len=len(ego_profile.rates))
        return ev.payoff(ego_profile.array)
    if estimator != "plain":
        raise ValueError(f"unknown estimator {estimator!r}")
    n = topology.n_agents
    seeds = replicate_seeds(seed, replicates, stream=3)
    ego = EgoDeviation(0, ego_profile)

    def one(s):
        run = percolate(topology, profile, ego, int(s))
        if not np.isfinite(run.receipt_time[0]):
            return 0.0
        return float(spec.R(run.rank[0] / n))

    vals = np.array(parallel.map_ordered(one, seeds, threads))
    cost = float(ego_profile.array @ topology.channel_costs(len(ego_profile.rates)))
    se = vals.std(ddof=1) / np.sqrt(replicates) if replicates > 1 else np.inf
    return PayoffEstimate(float(vals.mean() - cost), float(se), int(replicates), cost, float(vals.mean()))


# -- best response -------------------------------------------------------------------------

@dataclass
class BestResponse:
    phi: np.ndarray
    payoff: PayoffEstimate
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    concave: bool = True
    converged: bool = True


def _default_grid(theta):
    return np.concatenate([[0.0], theta * np.geomspace(1 / 16, 16, 25)])


def best_response(topology: Topology, spec: RewardSpec, profile: StrategyProfile,
                  search: dict | None = None, seed: int = 0, *, replicates: int = 1000,
                  threads: int | None = None, evaluator: EgoPayoff | None = None) -> BestResponse:
    """Ego's payoff-maximizing rates against ``profile``.

    Scalar strategies: CRN payoffs on a grid (``search["grid"]``), then a
    bounded Brent refinement around the best grid point.  Vector
    strategies: L-BFGS-B on ``[0, search["upper"]]`` with the pathwise
    gradient, started from ``search.get("x0", profile)``.
    """
    search = dict(search or {})
    ev = evaluator or EgoPayoff(topology, spec, profile, replicates, seed, threads=threads,
                                ego_len=search.get("ego_len"))
    if ev.scalar:
        theta = profile.rates[0]
        grid = np.asarray(search.get("grid", _default_grid(theta)), dtype=float)
        vals = np.array([ev.value([p]) for p in grid])
        slopes = np.diff(vals) / np.diff(grid)
        concave = bool(np.all(np.diff(slopes) <= 1e-9 * (1 + np.abs(slopes[1:]))))
        if not concave:
            warnings.warn("payoff is not concave on the search grid; returning the grid argmax")
        k = int(np.argmax(vals))
        phi = grid[k]
        if concave and 0 < k < grid.size - 1 or (concave and k == grid.size - 1 and grid.size > 1):
            lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
            res = optimize.minimize_scalar(lambda p: -ev.value([p]), bounds=(lo, hi), method="bounded",
                                           options={"xatol": search.get("xatol", 1e-7 * max(theta, 1e-12))})
            if -res.fun >= vals[k]:
                phi = float(res.x)
        elif concave and k == 0 and grid.size > 1 and grid[0] == 0.0:
            # derivative at 0 decides whether calling pays at all
            if ev.gradient([1e-12 * max(theta, 1.0)])[0][0] > 0:
                res = optimize.minimize_scalar(lambda p: -ev.value([p]), bounds=(0.0, grid[1]),
                                               method="bounded")
                phi = float(res.x) if -res.fun > vals[0] else 0.0
        phi_arr = np.array([phi])
        return BestResponse(phi_arr, ev.payoff(phi_arr), grid, vals, concave, True)

    x0 = np.asarray(search.get("x0", np.pad(profile.array, (0, max(ev.ego_len - len(profile.rates), 0)))),
                    dtype=float)
    upper = float(search.get("upper", 10.0 * max(profile.array.max(), 1e-3) + 1.0))

    def f(x):
        mean, _, g = ev.reward(x, True)
        return -(mean - x @ ev.costs), -(g.mean(axis=0) - ev.costs)

    res = optimize.minimize(f, x0, jac=True, method="L-BFGS-B", bounds=[(0.0, upper)] * x0.size,
                            options={"ftol": 1e-14, "gtol": search.get("gtol", 1e-9), "maxiter": 500})
    x = np.clip(res.x, 0.0, upper)
    return BestResponse(x, ev.payoff(x), None, None, True, bool(res.success))


# -- classification ----------------------------------------------------------------------------

def classify(payoff: float, stderr: float, rbar: float, *, tol: float = 0.05, z: float = 2.0):
    """Efficiency class of an equilibrium payoff with a confidence margin.

    Efficient when the payoff is within ``max(z*stderr, tol*rbar)`` of
    ``rbar``; totally wasteful when within that margin of 0; otherwise
    wasteful.  Returns ``(label, flag)`` where ``flag`` marks results whose
    confidence interval reaches a class boundary (or both).
    """
    margin = max(z * stderr, tol * rbar)
    eff = rbar - payoff <= margin
    waste = payoff <= margin
    if eff and waste:
        return "wasteful", True
    if eff:
        return "efficient", False
    if waste:
        return "totally_wasteful", False
    near = min(rbar - payoff - margin, payoff - margin) <= 2 * z * stderr
    return "wasteful", bool(near)


@dataclass
class NashEstimate:
    strategy: np.ndarray
    strategy_stderr: np.ndarray
    payoff: float
    payoff_stderr: float
    rbar: float
    classification: str
    flag: bool
    residual: float
    iterations: int
    trace: list = field(default_factory=list)
    topology: dict = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.rbar - self.payoff

    def ci(self, z: float = 2.0):
        return self.strategy - z * self.strategy_stderr, self.strategy + z * self.strategy_stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = [float(x) for x in self.strategy]
        d["strategy_stderr"] = [float(x) for x in self.strategy_stderr]
        d["trace"] = [[float(v) for v in np.atleast_1d(t)] for t in self.trace]
        lo, hi = self.ci()
        d["strategy_ci"] = [[float(a), float(b)] for a, b in zip(lo, hi)]
        d["cost"] = float(self.cost)
        return d


def _default_init(topology: Topology, rbar: float) -> StrategyProfile:
    if topology.kind == "complete":
        return StrategyProfile.scalar(rbar / 2)
    if topology.kind == "torus_nn":
        return StrategyProfile.scalar(2 * rbar / topology.size)
    if topology.kind == "short_long":
        c = topology.c_far
        return StrategyProfile.near_far(rbar / np.sqrt(c), rbar / c**2)
    return StrategyProfile.by_distance([2 * rbar / topology.size])


def nash_fixed_point(topology: Topology, spec: RewardSpec, init: StrategyProfile | None = None,
                     iterations: int = 60, seed: int = 0, *, replicates: int = 1000,
                     damping: float = 0.5, tol: float | None = None, rel_tol: float = 1e-4,
                     ego_len: int | None = None, threads: int | None = None,
                     class_tol: float = 0.05, method: str = "auto") -> NashEstimate:
    """Symmetric equilibrium of the calling game.

    ``method="iterate"`` runs damped best-response iteration
    ``theta <- (1-d) theta + d BR(theta)``.  ``method="stationary"`` (the
    ``"auto"`` choice for complete and nearest-neighbor topologies) solves
    the first-order condition directly: on unit-rate paths ego's reward
    depends on ``x = phi / theta`` only, so ``d payoff / d phi = 0`` at
    ``phi = theta`` reads ``theta = d reward / dx`` at ``x = 1``.  This is
    also the fixed point of the iteration whenever the payoff is concave,
    and it stays well defined when the payoff is nearly linear in ``phi``
    and best responses jump between the ends of the search range.

    The iteration stops when ego's paired payoff gain from best-responding
    is within two stderr of zero (vector strategies, whose payoff can be
    flat along directions that trade one distance for another), or when
    ``|BR(theta) - theta|`` drops below ``tol``; by default this is twice the statistical uncertainty of the stationary point (payoff
    derivative stderr over curvature), but never below ``rel_tol * theta``.
    Scalar topologies reuse one unit-rate path set for all iterations;
    vector ones resimulate with the same seed at every step.
    """
    n = topology.n_agents
    rbar = float(spec.rank_table(n)[1:].mean())
    if method not in ("auto", "iterate", "stationary"):
        raise ValueError(f"unknown method {method!r}")
    scalar = topology.kind in ("complete", "torus_nn")
    if method == "stationary" and not scalar:
        raise ValueError("the stationary solve needs a single-rate topology")
    if scalar and method != "iterate":
        return _nash_stationary(topology, spec, seed, replicates, threads, class_tol, rbar)
    prof = init or _default_init(topology, rbar)
    topology.check_profile(prof)
    theta = prof.array.copy()
    if ego_len is not None and ego_len > theta.size:
        theta = np.pad(theta, (0, ego_len - theta.size))
    base = None
    trace = []
    resid = np.inf
    it = 0
    br = None
    floor = 1e-9 * max(rbar, 1e-12)
    for it in range(1, iterations + 1):
        current = StrategyProfile.by_distance(theta) if theta.size > 1 else StrategyProfile.scalar(theta[0])
        if topology.kind == "short_long":
            current = StrategyProfile.near_far(*theta)
        if base is None or not base.scalar:
            ev = EgoPayoff(topology, spec, current, replicates, seed, threads=threads, ego_len=theta.size)
            base = ev
        else:
            ev = base.with_theta(float(theta[0]))
        br = best_response(topology, spec, current, evaluator=ev,
                           search={"x0": theta} if not ev.scalar else None)
        phi = br.phi
        resid = float(np.max(np.abs(phi - theta)))
        trace.append(theta.copy())
        se = ev.strategy_stderr(phi)
        this_tol = tol
        if this_tol is None:
            stat = 2 * float(np.max(se)) if se is not None and np.all(np.isfinite(se)) else 0.0
            this_tol = max(stat, rel_tol * float(np.max(theta)))
        gain, gain_se = ev.gain(phi, theta)
        if resid < this_tol or (not ev.scalar and gain <= 2 * gain_se + 1e-9 * rbar):
            # no profitable deviation is statistically detectable
            if resid < this_tol:
                theta = phi
            break
        theta = np.maximum((1 - damping) * theta + damping * phi, 0.0)
        if not np.any(theta > 0):
            theta = np.full_like(theta, floor)
    else:
        raise RuntimeError(f"best-response iteration did not settle in {iterations} steps "
                           f"(residual {resid:.3g}); trace={[list(map(float, t)) for t in trace[-5:]]}")
    final = StrategyProfile.scalar(theta[0]) if theta.size == 1 else (
        StrategyProfile.near_far(*theta) if topology.kind == "short_long" else StrategyProfile.by_distance(theta))
    ev_final = base.with_theta(float(theta[0])) if base.scalar else EgoPayoff(
        topology, spec, final, replicates, seed, threads=threads, ego_len=theta.size)
    s_se = ev_final.strategy_stderr(theta)
    costs = topology.channel_costs(theta.size)
    cost = float(theta @ costs)
    cost_se = float(np.sqrt(np.sum((np.where(np.isfinite(s_se), s_se, 0.0) * costs) ** 2)))
    payoff = rbar - cost
    label, flag = classify(payoff, cost_se, rbar, tol=class_tol)
    return NashEstimate(theta, s_se, payoff, cost_se, rbar, label, flag, resid, it, trace,
                        topology.to_config())


def _nash_stationary(topology, spec, seed, replicates, threads, class_tol, rbar):
    ev = EgoPayoff(topology, spec, StrategyProfile.scalar(1.0), replicates, seed, threads=threads)
    g, gse = ev.gradient([1.0])
    theta = max(float(g[0] + ev.costs[0]), 0.0)      # d reward / dx at x = 1
    se = float(gse[0])
    resid = 0.0
    if theta > 0:
        br = best_response(topology, spec, StrategyProfile.scalar(theta), evaluator=ev.with_theta(theta))
        resid = float(abs(br.phi[0] - theta))
    payoff = rbar - theta
    label, flag = classify(payoff, se, rbar, tol=class_tol)
    return NashEstimate(np.array([theta]), np.array([se]), payoff, se, rbar, label, flag, resid, 1,
                        [np.array([theta])], topology.to_config())


def classify_ladder(sizes, estimates, *, tol: float = 0.05, z: float = 2.0) -> dict:
    """Limit classification from equilibria at increasing system sizes.

    Fits ``log cost`` against ``log size``.  A slope below zero by more than
    ``z`` standard errors (or, with two points, below -0.5) means the cost
    vanishes and the equilibrium is efficient; otherwise the largest system
    is classified on its own.
    """
    costs = np.array([e.cost for e in estimates])
    fit = loglog_slope(sizes, costs)
    se = fit.stderr if np.isfinite(fit.stderr) else 0.0
    if fit.slope + z * se < -0.5 * (1 if not np.isfinite(fit.stderr) else 0) and fit.slope < 0:
        label = "efficient"
    else:
        last = estimates[int(np.argmax(sizes))]
        label = classify(last.payoff, last.payoff_stderr, last.rbar, tol=tol, z=z)[0]
    return {"classification": label, "slope": fit.slope, "slope_stderr": fit.stderr}


# -- short-long torus ------------------------------------------------------------------------------

@dataclass
class ShortLongNash:
    theta_near: float
    theta_far: float
    c_N: float
    Q: float
    area: float
    K1: float
    K2: float
    dz1: float
    cost: float
    window_width: float

    @property
    def lambda_N(self) -> float:
        return self.theta_far / self.theta_near


def short_long_constants(spec: RewardSpec, fq: FquadSolution | None = None):
    """``K1 = int (1-y) r(y) int_{-inf}^{F^-1(y)} F`` and ``K2 = int r(u) F'(F^-1(u))``.

    ``F`` is the unit solution of the short-long limit equation.
    """
    fq = fq or solve_fquad(1.0)
    t, F = fq.t, fq.F
    a = (2.0 * fq.lam) ** (1.0 / 3.0)
    h = np.diff(t)
    G = F[0] / a + np.concatenate([[0.0], np.cumsum(0.5 * (F[1:] + F[:-1]) * h)])
    dens = np.gradient(F, t)
    keep = np.concatenate([[True], np.diff(F) > 0])
    tk, Fk, Gk, dk = t[keep], F[keep], G[keep], dens[keep]

    def tq(y):
        return np.interp(y, Fk, tk)

    def f1(y):
        if y >= 1.0:
            return 0.0
        return (1.0 - y) * float(np.interp(tq(y), tk, Gk))

    def f2(u):
        if u <= 0.0 or u >= 1.0:
            return 0.0
        return float(np.interp(tq(u), tk, dk))

    # the integrands are piecewise linear interpolants, so quad may report
    # roundoff near its tolerance; the grid error dominates anyway
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return spec.stieltjes(f1, epsabs=1e-10, epsrel=1e-8), spec.stieltjes(f2, epsabs=1e-10, epsrel=1e-8)


def nash_short_long(spec: RewardSpec, c_N: float, area: float, dz1: float,
                    fq: FquadSolution | None = None, *, N: int | None = None) -> ShortLongNash:
    """Limit equilibrium ``(theta_near, theta_far)`` on the short-long torus.

    ``area`` and ``dz1`` (= z'(1)) must refer to nearest-neighbor percolation
    with rate 1/4 per directed edge, the neighbor rate of the short-long
    model at unit near rate.  The sign of ``dz1`` is ignored (its magnitude
    enters).  With ``Q = |z'(1)| K1 K2``:

        theta_near = Q^(1/2) c^(-1/2),  theta_far = K1^3 / (A Q c^2).
    """
    if not c_N > 1:
        raise ValueError("need c_N > 1")
    if N is not None and not c_N < N * N:
        raise ValueError(f"c_N must be below N^2 = {N * N} for the short-long regime")
    fq = fq or solve_fquad(1.0)
    K1, K2 = short_long_constants(spec, fq)
    Q = abs(dz1) * K1 * K2
    near = np.sqrt(Q / c_N)
    far = K1**3 / (area * Q * c_N**2)
    X = K1 / c_N
    return ShortLongNash(float(near), float(far), float(c_N), float(Q), float(area), float(K1), float(K2),
                         float(dz1), float(near + c_N * far), float(fq.window_width() / X))


# -- distance-cost torus ---------------------------------------------------------------------------

def _mean_width(topology, profile, runs, seed):
    seeds = replicate_seeds(seed, runs, stream=21)
    return float(np.mean([spread_stats(percolate(topology, profile, seed=int(s))).width for s in seeds]))


def distance_cost_efficiency(spec: RewardSpec, cost, N_grid, seed: int = 0, *, d_max: int = 8,
                             replicates: int = 200, iterations: int = 40, width_runs: int = 4,
                             threads: int | None = None, z: float = 2.0) -> dict:
    """Equilibria on distance-cost tori of several sizes.

    Strategies are truncated to distances ``d <= d_max``; when the
    equilibrium still calls at ``d_max`` (beyond ``z`` stderr) the
    truncation is doubled and the size rerun.  Reports per size the
    strategy, cost per agent, window width and the largest distance that is
    called significantly.
    """
    rows = []
    for N in N_grid:
        top = Topology.distance_cost(int(N), cost)
        dm = min(d_max, torus_max_distance(int(N)))
        while True:
            rbar = float(spec.rank_table(top.n_agents)[1:].mean())
            init = StrategyProfile.by_distance([2 * rbar / N] + [0.0] * (dm - 1))
            est = nash_fixed_point(top, spec, init, iterations, seed, replicates=replicates,
                                   ego_len=dm, threads=threads)
            lo = est.strategy - z * np.where(np.isfinite(est.strategy_stderr), est.strategy_stderr, 0.0)
            used = np.flatnonzero(lo > 0)
            d_star = int(used[-1]) + 1 if used.size else (1 if est.strategy[0] > 0 else 0)
            if d_star < dm or dm >= torus_max_distance(int(N)):
                break
            dm = min(2 * dm, torus_max_distance(int(N)))
        support = np.flatnonzero(est.strategy > 0)
        prof = StrategyProfile.by_distance(est.strategy[: support[-1] + 1] if support.size else [1e-9])
        width = _mean_width(top, prof, width_runs, seed)
        rows.append({"N": int(N), "strategy": [float(x) for x in est.strategy],
                     "strategy_stderr": [float(x) for x in est.strategy_stderr],
                     "cost": float(est.cost), "payoff": float(est.payoff), "d_star": d_star,
                     "d_max": dm, "window_width": width, "classification": est.classification})
    return {"rows": rows, "cost_slope": loglog_slope([r["N"] for r in rows], [r["cost"] for r in rows]).slope
            if len(rows) >= 2 else float("nan")}
