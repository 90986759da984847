"""Simulation of one item spreading by pull calls.

``percolate`` runs the full process for every topology, optionally with a
single deviating agent.  ``ego_free_paths`` runs the same process with ego
never receiving; ego's rank under any strategy is then a functional of that
path alone, which is what the payoff estimators integrate against.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .. import parallel
from ..seeding import replicate_seeds
from . import _kernels as K
from .topology import EgoDeviation, StrategyProfile, Topology, torus_shells

__all__ = [
    "RunResult",
    "SpreadStats",
    "PathBatch",
    "percolate",
    "percolate_regular",
    "spread_stats",
    "ego_rank_distribution",
    "ego_free_paths",
    "lattice_kernel_args",
]

_NO_WATCH = np.zeros(0, dtype=np.bool_)


@dataclass
class RunResult:
    """Receipt times and ranks for one item (``inf`` = never informed)."""

    receipt_time: np.ndarray
    rank: np.ndarray
    source: int
    seed: int

    @property
    def n_agents(self) -> int:
        return self.receipt_time.size

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "receipt_time", "rank"])
        for i, (t, r) in enumerate(zip(self.receipt_time, self.rank)):
            w.writerow([i, format(float(t), ".17g"), int(r)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        finite = np.isfinite(self.receipt_time)
        return {
            "n_agents": int(self.n_agents),
            "source": int(self.source),
            "seed": int(self.seed),
            "n_informed": int(finite.sum()),
            "last_time": float(self.receipt_time[finite].max()),
        }


@dataclass
class SpreadStats:
    times: np.ndarray          # sorted finite receipt times (the empirical CDF support)
    width: float
    quantiles: dict = field(default_factory=dict)

    def ecdf(self, t):
        return np.searchsorted(self.times, t, side="right") / self.times.size

    def to_json(self) -> str:
        return json.dumps({"width": self.width,
                           "quantiles": {str(k): v for k, v in self.quantiles.items()}},
                          sort_keys=True)


def _ranks_from_order(order: np.ndarray, n: int) -> np.ndarray:
    rank = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    seen[order] = True
    rank[order] = np.arange(1, order.size + 1)
    rest = np.flatnonzero(~seen)
    rank[rest] = np.arange(order.size + 1, n + 1)
    return rank


def _draw_source(seed: int, n: int, exclude: int = -1) -> int:
    rng = np.random.default_rng([int(seed), 0xC0FFEE])
    if exclude < 0:
        return int(rng.integers(n))
    s = int(rng.integers(n - 1))
    return s + 1 if s >= exclude else s


def lattice_kernel_args(topology: Topology, profile: StrategyProfile,
                        ego_profile: StrategyProfile | None):
    """Offsets, per-target rates and far-channel rates for ``lattice_run``.

    Also returns the grouping depth and exposure weights used to describe
    ego's hazard (per informed agent in each group).
    """
    N = topology.size
    theta = profile.array
    phi = ego_profile.array if ego_profile is not None else np.zeros_like(theta)
    if topology.kind in ("torus_nn", "short_long"):
        D = 1
    else:
        D = max(theta.size, phi.size)
        theta = np.pad(theta, (0, D - theta.size))
        phi = np.pad(phi, (0, D - phi.size))
    dx, dy, shell, sizes = torus_shells(N, D)
    near_o = theta[:D] / sizes
    near_e = phi[:D] / sizes
    far_o = far_e = 0.0
    fdx = fdy = np.zeros(0, dtype=np.int64)
    weights = 1.0 / sizes.astype(float)
    far_group = False
    if topology.kind == "short_long":
        n_far = topology.n_far()
        far_o = theta[1] / n_far
        far_e = phi[1] / n_far
        fdx, fdy = dx, dy
        weights = np.array([1.0 / sizes[0], 1.0 / n_far])
        far_group = True
    active = (near_o[shell] > 0) | (near_e[shell] > 0)
    return dict(
        odx=np.ascontiguousarray(dx[active]), ody=np.ascontiguousarray(dy[active]),
        oshell=np.ascontiguousarray(shell[active]),
        rate_o=np.ascontiguousarray(near_o, dtype=float),
        rate_e=np.ascontiguousarray(near_e, dtype=float),
        fdx=np.ascontiguousarray(fdx), fdy=np.ascontiguousarray(fdy),
        far_o=float(far_o), far_e=float(far_e),
        d_group=D, far_group=far_group, weights=weights,
    )


def _run_lattice(topology, profile, ego_profile, ego, source, seed, *,
                 ref=-1, stop_mode=0, watch=_NO_WATCH, t_max=np.inf):
    a = lattice_kernel_args(topology, profile, ego_profile)
    return K.lattice_run(topology.size, a["odx"], a["ody"], a["oshell"], a["rate_o"], a["rate_e"],
                         a["fdx"], a["fdy"], a["far_o"], a["far_e"],
                         ego, source, seed, ref, a["d_group"], a["far_group"],
                         stop_mode, watch, t_max)


def percolate(topology: Topology, profile: StrategyProfile, ego: EgoDeviation | None = None,
              seed: int = 0, *, source: int | None = None) -> RunResult:
    """Spread one item from a uniformly chosen source.

    Ego's deviant rates govern only ego's own calls; everyone else is
    affected only through ego's receipt (callers pull from ego once it
    knows).  Ego uses its deviant rates even when it is the source.
    """
    topology.check_profile(profile)
    n = topology.n_agents
    ego_id = -1
    ego_profile = None
    if ego is not None:
        if not 0 <= ego.agent < n:
            raise ValueError(f"ego id {ego.agent} outside 0..{n - 1}")
        topology.check_profile(ego.profile, allow_zero=True)
        ego_id, ego_profile = int(ego.agent), ego.profile
    if source is None:
        source = _draw_source(seed, n)
    elif not 0 <= source < n:
        raise ValueError("source id out of range")
    if topology.kind == "complete":
        phi = ego_profile.rates[0] if ego_profile is not None else 0.0
        times, order, _, _ = K.complete_run(n, profile.rates[0], phi, ego_id, int(source), int(seed), True)
    else:
        times, order, _, _, _ = _run_lattice(topology, profile, ego_profile, ego_id, int(source), int(seed))
    return RunResult(times, _ranks_from_order(order, n), int(source), int(seed))


def percolate_regular(n: int, theta: float, seed: int = 0, *, source: int | None = None) -> RunResult:
    """Complete graph where each agent calls at ``U_i + k/theta`` instead of Poisson times."""
    if not theta > 0:
        raise ValueError("regular calling needs theta > 0")
    if source is None:
        source = _draw_source(seed, n)
    times = K.complete_regular_run(int(n), float(theta), int(source), int(seed))
    order = np.argsort(times, kind="stable")
    return RunResult(times, _ranks_from_order(order, n), int(source), int(seed))


def spread_stats(run: RunResult | np.ndarray, lo: float = 0.1, hi: float = 0.9) -> SpreadStats:
    """Empirical CDF of receipt times and the ``lo``-to-``hi`` window width.

    ``t(q)`` is the receipt time of the ``ceil(q * n)``-th informed agent.
    """
    if not 0 <= lo < hi <= 1:
        raise ValueError(f"need 0 <= lo < hi <= 1, got lo={lo}, hi={hi}")
    times = run.receipt_time if isinstance(run, RunResult) else np.asarray(run, dtype=float)
    n = times.size
    t = np.sort(times[np.isfinite(times)])

    def quant(qv):
        k = max(int(np.ceil(qv * n - 1e-12)), 1)
        return float(t[min(k, t.size) - 1])

    qs = {q: quant(q) for q in sorted({lo, hi, 0.25, 0.5, 0.75})}
    return SpreadStats(t, qs[hi] - qs[lo], qs)


def ego_rank_distribution(topology: Topology, profile: StrategyProfile, ego: EgoDeviation,
                          replicates: int, seed: int, *, threads: int | None = None) -> np.ndarray:
    """Ego's normalized rank ``rank / n`` in independent replicates (sorted)."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    seeds = replicate_seeds(seed, replicates, stream=1)
    n = topology.n_agents

    def one(s):
        return percolate(topology, profile, ego, int(s)).rank[ego.agent] / n

    return np.sort(np.array(parallel.map_ordered(one, seeds, threads)))


@dataclass
class PathBatch:
    """Ego-free percolation paths, trimmed to the events that can expose ego.

    Events before the first one in an exposing group are dropped and
    counted in ``rank0``.  ``weights[g]`` is ego's per-unit-rate hazard per
    informed agent of group ``g``.  ``time_scale`` records the population
    rate the paths were simulated at for scalar strategies (times are then
    stored at unit rate).
    """

    times: np.ndarray
    groups: np.ndarray
    starts: np.ndarray
    rank0: np.ndarray
    weights: np.ndarray
    n_agents: int
    seeds: np.ndarray
    time_scale: float = 1.0

    @property
    def replicates(self) -> int:
        return self.starts.size - 1

    def conditional_reward(self, rtab: np.ndarray, phi, want_grad: bool = False):
        """Per-path expected reward (and gradient) for ego rates ``phi``.

        ``phi`` is in the units of the stored paths.  The ``1/n`` chance
        that ego is itself the source is not included here.
        """
        phi = np.ascontiguousarray(np.atleast_1d(np.asarray(phi, dtype=float)))
        if phi.size != self.weights.size:
            raise ValueError(f"expected {self.weights.size} ego rates, got {phi.size}")
        return K.conditional_reward(self.times, self.groups, self.starts, self.rank0,
                                    self.weights, phi, rtab, want_grad)


def _ego_free_one(topology, profile, ego_len, seed, max_rank):
    n = topology.n_agents
    source = _draw_source(seed, n, exclude=0)
    if topology.kind == "complete":
        _, _, evt, q = K.complete_run(n, profile.rates[0], 0.0, 0, source, int(seed), False)
        # every informed non-ego agent exposes ego; ego itself is never informed
        evt, grp, first = evt[:q], np.zeros(q, dtype=np.int16), 0
    else:
        zero = StrategyProfile((0.0,) * ego_len)
        _, _, evt, grp, _ = _run_lattice(topology, profile, zero, 0, source, int(seed), ref=0)
        hit = np.flatnonzero(grp >= 0)
        first = int(hit[0]) if hit.size else evt.size
    stop = evt.size
    if max_rank is not None:
        # ego's rank is at least first + 2 after the stored events begin
        stop = min(stop, first + max(int(max_rank) - first + 1, 0))
    return evt[first:stop].copy(), grp[first:stop].copy(), first


def ego_free_paths(topology: Topology, profile: StrategyProfile, replicates: int, seed: int,
                   *, threads: int | None = None, stream: int = 2, max_rank: int | None = None,
                   ego_len: int | None = None) -> PathBatch:
    """Simulate ``replicates`` ego-free paths with ego at agent 0.

    The source is uniform over the other agents.  For the scalar-rate
    topologies the paths are simulated at unit rate and ``time_scale`` is
    set to the population rate.  ``max_rank`` drops events that can only
    change ego's rank beyond that value (useful when the reward vanishes
    there).  ``ego_len`` lets ego use more distance classes than the
    population on the distance-cost torus.
    """
    topology.check_profile(profile)
    if ego_len is None:
        ego_len = len(profile.rates)
    seeds = replicate_seeds(seed, replicates, stream=stream)
    scale = 1.0
    sim_profile = profile
    if topology.kind in ("complete", "torus_nn"):
        scale = profile.rates[0]
        sim_profile = StrategyProfile.scalar(1.0)
    parts = parallel.map_ordered(lambda s: _ego_free_one(topology, sim_profile, ego_len, s, max_rank),
                                 seeds, threads)
    lens = np.array([p[0].size for p in parts], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    times = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    groups = np.concatenate([p[1] for p in parts]).astype(np.int16) if parts else np.zeros(0, np.int16)
    rank0 = np.array([p[2] for p in parts], dtype=np.int64)
    if topology.kind == "complete":
        weights = np.array([1.0 / (topology.n_agents - 1)])
    else:
        weights = lattice_kernel_args(topology, sim_profile,
                                      StrategyProfile((0.0,) * ego_len))["weights"]
    return PathBatch(times, groups, starts, rank0, np.asarray(weights, dtype=float),
                     topology.n_agents, seeds, scale)
