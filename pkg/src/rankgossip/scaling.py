"""Log-log slope fits for scaling checks."""

from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int

    def within(self, target: float, tol: float) -> bool:
        return abs(self.slope - target) <= tol


def loglog_slope(x, y) -> SlopeFit:
    """Least-squares slope of ``log y`` against ``log x`` (non-positive values dropped)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        raise ValueError("need at least two positive points for a slope")
    if ok.sum() == 2:
        lx, ly = np.log(x[ok]), np.log(y[ok])
        s = (ly[1] - ly[0]) / (lx[1] - lx[0])
        return SlopeFit(float(s), float("nan"), float(ly[0] - s * lx[0]), 2)
    fit = stats.linregress(np.log(x[ok]), np.log(y[ok]))
    return SlopeFit(float(fit.slope), float(fit.stderr), float(fit.intercept), int(ok.sum()))


@dataclass
class WindowSweep:
    axis: str
    rates: np.ndarray
    widths: np.ndarray
    width_stderr: np.ndarray
    fit: SlopeFit


def window_sweep(N: int, axis: str = "far", *, near: float = 1.0, far: float = 1e-3,
                 factors=None, runs: int = 4, seed: int = 0, threads=None) -> WindowSweep:
    """Window width of short-long percolation while one rate is varied.

    ``axis`` selects which of ``near`` / ``far`` is multiplied by
    ``factors`` (default ``geomspace(1/4, 4, 9)``); the other stays fixed.
    Each point averages ``runs`` independent runs.
    """
    from .fpp import StrategyProfile, Topology, percolate, spread_stats
    from .parallel import map_ordered
    from .seeding import replicate_seeds

    if axis not in ("near", "far"):
        raise ValueError("axis must be 'near' or 'far'")
    factors = np.geomspace(0.25, 4.0, 9) if factors is None else np.asarray(factors, dtype=float)
    top = Topology.short_long(N, 1.0)
    rates = (near if axis == "near" else far) * factors
    jobs = []
    for i, r in enumerate(rates):
        prof = StrategyProfile.near_far(r, far) if axis == "near" else StrategyProfile.near_far(near, r)
        for s in replicate_seeds(seed, runs, stream=31, start=i * runs):
            jobs.append((prof, int(s)))
    ws = np.array(map_ordered(lambda j: spread_stats(percolate(top, j[0], seed=j[1])).width, jobs, threads))
    ws = ws.reshape(rates.size, runs)
    se = ws.std(axis=1, ddof=1) / np.sqrt(runs) if runs > 1 else np.full(rates.size, np.nan)
    return WindowSweep(axis, rates, ws.mean(axis=1), se, loglog_slope(rates, ws.mean(axis=1)))
