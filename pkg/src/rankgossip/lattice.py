"""Monte-Carlo estimates for nearest-neighbor percolation on the square lattice.

Conventions: every agent pulls from each of its 4 neighbors at
``edge_rate`` (1 by default, i.e. total calling rate 4).  Rank-based
quantities such as the Nash rate do not depend on this choice as long as
all pieces use the same one.  Limit-shape areas scale as ``edge_rate**2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, spatial, stats

from . import parallel
from .fpp import _kernels as K
from .fpp.topology import torus_shells
from .reward import RewardSpec
from .seeding import replicate_seeds

__all__ = [
    "ShapeEstimate",
    "TauSample",
    "ZLambdaEstimate",
    "estimate_shape",
    "sample_tau",
    "estimate_z",
    "conditional_g",
    "nash_torus_nn",
    "uniform_rank_check",
    "UniformRankResult",
]

_NO_WATCH = np.zeros(0, dtype=np.bool_)
_EMPTY = np.zeros(0, dtype=np.int64)


def _nn_run(N, edge_rate, ego_rate, ego, source, seed, *, stop_mode=0, watch=_NO_WATCH,
            t_max=np.inf, ref=-1):
    dx, dy, shell, _ = torus_shells(N, 1)
    return K.lattice_run(N, dx, dy, shell, np.array([edge_rate]), np.array([ego_rate]),
                         _EMPTY, _EMPTY, 0.0, 0.0, ego, source, seed, ref, 1, False,
                         stop_mode, watch, t_max)


def _vid(x, y, N):
    return (x % N) * N + (y % N)


# -- limit shape -------------------------------------------------------------------

@dataclass
class ShapeEstimate:
    """Estimated limit shape ``B`` of nearest-neighbor percolation.

    ``angles``/``radius`` give the radial function of ``B`` (scaled so its
    area equals ``area_limit``); ``s_grid``/``q`` tabulate the area of ``sB`` on
    the unit torus.
    """

    area: float
    area_stderr: float
    area_half: float            # same estimate at s_max / 2
    area_limit: float           # s -> inf extrapolation from s_max / 2 and s_max
    area_limit_half: float      # the same from s_max / 4 and s_max / 2
    inner: float                # B contains the L1 ball of this radius
    outer: float                # and is contained in this one
    hull_excess: float          # convex-hull area / area - 1 for the averaged set
    angles: np.ndarray
    radius: np.ndarray
    s_grid: np.ndarray
    q: np.ndarray
    edge_rate: float = 1.0
    s_max: float = 0.0
    replicates: int = 0

    def rescaled(self, edge_rate: float) -> "ShapeEstimate":
        """The same shape for another edge rate (lengths scale linearly in the rate)."""
        c = edge_rate / self.edge_rate
        return ShapeEstimate(self.area * c * c, self.area_stderr * c * c, self.area_half * c * c,
                             self.area_limit * c * c, self.area_limit_half * c * c, self.inner * c, self.outer * c, self.hull_excess, self.angles,
                             self.radius * c, self.s_grid / c, self.q, edge_rate, self.s_max / c,
                             self.replicates)

    def gauge(self, x, y):
        """``rho(x, y)``: the norm whose unit ball is ``B``."""
        r = np.hypot(x, y)
        ang = np.mod(np.arctan2(y, x), 2 * np.pi)
        rad = np.interp(ang, self.angles, self.radius, period=2 * np.pi)
        return r / rad

    def q_spline(self):
        return interpolate.PchipInterpolator(self.s_grid, self.q, extrapolate=False)

    def V(self, u):
        """``q'(q^{-1}(u))``: growth rate of the informed fraction at level ``u``."""
        u = np.asarray(u, dtype=float)
        qs = self.q_spline()
        keep = np.concatenate([[True], np.diff(self.q) > 0])
        s_of_u = interpolate.PchipInterpolator(self.q[keep], self.s_grid[keep], extrapolate=False)
        s = s_of_u(np.clip(u, self.q[keep][0], self.q[keep][-1]))
        return np.nan_to_num(qs.derivative()(s), nan=0.0)

    def table(self) -> np.ndarray:
        return np.column_stack([self.s_grid, self.q])


def _torus_q(angles, radius, n_raster=600, n_s=400):
    """Area of ``sB`` on the unit torus, by rasterizing the torus gauge."""
    g = (np.arange(n_raster) + 0.5) / n_raster - 0.5
    X, Y = np.meshgrid(g, g, indexing="ij")
    best = np.full(X.shape, np.inf)
    for kx in (-1, 0, 1):
        for ky in (-1, 0, 1):
            xx, yy = X + kx, Y + ky
            ang = np.mod(np.arctan2(yy, xx), 2 * np.pi)
            rho = np.hypot(xx, yy) / np.interp(ang, angles, radius, period=2 * np.pi)
            np.minimum(best, rho, out=best)
    vals = np.sort(best.ravel())
    s_grid = np.linspace(0.0, vals[-1] * 1.0001, n_s)
    q = np.searchsorted(vals, s_grid, side="right") / vals.size
    # exact small-s behaviour before any wrapping: q = A s^2
    return s_grid, q


def estimate_shape(L: int = 400, s_max: float | None = None, replicates: int = 8, seed: int = 0,
                   *, edge_rate: float = 1.0, n_angles: int = 180,
                   threads: int | None = None) -> ShapeEstimate:
    """Grow clusters from the center of a ``(2L+1)``-square torus up to time ``s_max``.

    Raises if any cluster reaches the edge of the box, since then the torus
    wrap would distort the shape.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates for an error bar")
    N = 2 * L + 1
    if s_max is None:
        # clusters advance about 2.9 * edge_rate lattice units per unit time along the axes
        s_max = 0.3 * L / edge_rate
    center = _vid(L, L, N)
    xs, ys = np.divmod(np.arange(N * N), N)
    dxs, dys = xs - L, ys - L
    l1 = np.abs(dxs) + np.abs(dys)
    edge = (np.abs(dxs) == L) | (np.abs(dys) == L)
    seeds = replicate_seeds(seed, replicates, stream=11)

    def one(s):
        times = _nn_run(N, edge_rate, edge_rate, -1, center, int(s), t_max=s_max)[0]
        return times

    runs = parallel.map_ordered(one, seeds, threads)
    areas, areas_half, areas_q, inner, outer = [], [], [], [], []
    hit = np.zeros(N * N)
    for times in runs:
        wet = times <= s_max
        if np.any(wet & edge):
            raise RuntimeError("cluster touched the box boundary; increase L")
        areas.append(wet.sum() / s_max**2)
        areas_half.append((times <= s_max / 2).sum() / (s_max / 2) ** 2)
        areas_q.append((times <= s_max / 4).sum() / (s_max / 4) ** 2)
        inner.append(l1[~wet].min() / s_max)
        outer.append(l1[wet].max() / s_max)
        hit += wet
    areas = np.array(areas)
    A = float(areas.mean())
    A_se = float(areas.std(ddof=1) / np.sqrt(replicates))
    A_half, A_q = float(np.mean(areas_half)), float(np.mean(areas_q))
    A_lim = _extrapolate_area(A_half, A)
    if not A_lim > 0:
        raise ValueError(f"s_max = {s_max} is too small for the area extrapolation")
    A_lim_half = _extrapolate_area(A_q, A_half)

    # averaged set {P(wet) >= 1/2}: convexity diagnostic
    avg = hit / replicates >= 0.5
    pts = np.column_stack([dxs[avg], dys[avg]]).astype(float)
    corners = np.concatenate([pts + [a, b] for a in (-0.5, 0.5) for b in (-0.5, 0.5)])
    hull = spatial.ConvexHull(corners)
    hull_excess = float(hull.volume / avg.sum() - 1.0)

    # radial function from the averaged set, then rescaled to the mean area
    grid = (hit / replicates).reshape(N, N)
    angles = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
    rr = np.linspace(0, L - 1, 4 * L)
    radius = np.empty(n_angles)
    for k, a in enumerate(angles):
        px = L + rr * np.cos(a)
        py = L + rr * np.sin(a)
        vals = _bilinear(grid, px, py)
        below = np.flatnonzero(vals < 0.5)
        j = below[0] if below.size else rr.size - 1
        j = max(j, 1)
        # linear interpolation of the 1/2 crossing
        f0, f1 = vals[j - 1], vals[j]
        frac = (f0 - 0.5) / (f0 - f1) if f0 != f1 else 0.0
        radius[k] = (rr[j - 1] + frac * (rr[j] - rr[j - 1])) / s_max
    raw_area = 0.5 * np.mean(radius**2) * 2 * np.pi
    radius *= np.sqrt(A_lim / raw_area)
    s_grid, q = _torus_q(angles, radius)
    return ShapeEstimate(A, A_se, A_half, A_lim, A_lim_half, float(np.min(inner)),
                         float(np.max(outer)), hull_excess, angles, radius, s_grid, q,
                         float(edge_rate), float(s_max), replicates)


def _extrapolate_area(a_half, a_full, exponent=-2.0 / 3.0):
    """Remove the leading ``s**exponent`` deficit of ``|B_s| / s^2`` using s and s/2.

    The rough boundary of the cluster lags the limit shape by ``O(s^(1/3))``,
    so the relative area deficit decays like ``s^(-2/3)``.  The correction
    is only asymptotic: below ``s`` of about 100 (at edge rate 1) growth is
    still in a transient regime and the extrapolation underestimates.
    """
    k = 2.0 ** exponent
    return (a_full - k * a_half) / (1.0 - k)


def _bilinear(grid, x, y):
    x0 = np.clip(np.floor(x).astype(int), 0, grid.shape[0] - 2)
    y0 = np.clip(np.floor(y).astype(int), 0, grid.shape[1] - 2)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * grid[x0, y0] + fx * (1 - fy) * grid[x0 + 1, y0]
            + (1 - fx) * fy * grid[x0, y0 + 1] + fx * fy * grid[x0 + 1, y0 + 1])


# -- neighbor gaps ---------------------------------------------------------------------

@dataclass
class TauSample:
    """Receipt-time gaps of the 4 neighbors of a vertex that never calls.

    ``tau[:, i]`` for neighbors (+x, -x, +y, -y); ``first`` is the time the
    first neighbor was reached, ``direction`` the angle of the source.
    """

    tau: np.ndarray
    first: np.ndarray
    direction: np.ndarray
    r: float
    edge_rate: float = 1.0

    def __len__(self):
        return self.tau.shape[0]

    def to_csv(self, path=None) -> str:
        lines = ["tau1,tau2,tau3,tau4,first,direction"]
        for row, f, d in zip(self.tau, self.first, self.direction):
            lines.append(",".join(format(float(v), ".17g") for v in (*row, f, d)))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def sample_tau(r: float = 32, replicates: int = 1000, seed: int = 0, *, edge_rate: float = 1.0,
               threads: int | None = None) -> TauSample:
    """Neighbor gaps around a silent origin, source at distance ``r`` in a uniform direction.

    The origin never calls, so the item can only reach its neighbors along
    paths avoiding it.  Each sample runs until all 4 neighbors are reached.
    """
    if r < 1:
        raise ValueError("source distance must be at least 1")
    N = 4 * int(np.ceil(r)) + 1
    c = N // 2
    origin = _vid(c, c, N)
    nbrs = np.array([_vid(c + 1, c, N), _vid(c - 1, c, N), _vid(c, c + 1, N), _vid(c, c - 1, N)])
    watch = np.zeros(N * N, dtype=np.bool_)
    watch[nbrs] = True
    seeds = replicate_seeds(seed, replicates, stream=12)

    def one(s):
        rng = np.random.default_rng(int(s))
        while True:
            ang = rng.uniform(0, 2 * np.pi)
            sx, sy = int(round(c + r * np.cos(ang))), int(round(c + r * np.sin(ang)))
            if (sx, sy) != (c, c):
                break
        times = _nn_run(N, edge_rate, 0.0, origin, _vid(sx, sy, N), int(s) ^ 0x9E3779B1,
                        stop_mode=1, watch=watch)[0]
        t = times[nbrs]
        return t - t.min(), t.min(), ang

    out = parallel.map_ordered(one, seeds, threads)
    tau = np.array([o[0] for o in out])
    return TauSample(tau, np.array([o[1] for o in out]), np.array([o[2] for o in out]),
                     float(r), float(edge_rate))


# -- deviation functional ------------------------------------------------------------------

@dataclass
class ZLambdaEstimate:
    """``z(lam) = E Z(lam)`` on a grid, with ``z'(1)`` and its standard error."""

    lambdas: np.ndarray
    z: np.ndarray
    z_stderr: np.ndarray
    dz1: float
    dz1_stderr: float
    dz1_pathwise: float          # mean of the exact pathwise derivative at lam = 1
    samples: np.ndarray = field(repr=False)   # Z(lam) per replicate (rows) and lam (cols)
    edge_rate: float = 1.0

    def table(self) -> np.ndarray:
        return np.column_stack([self.lambdas, self.z, self.z_stderr])


def _zmin(tau, xi, lam):
    return np.min(tau + xi / lam, axis=1)


def estimate_z(taus: TauSample, lambdas=None, replicates: int | None = None, seed: int = 0,
               *, step: float = 0.1) -> ZLambdaEstimate:
    """Coupled estimates of ``Z(lam) = min(tau + xi/lam) - min(tau + xi)``.

    ``xi`` are independent exponentials at the tau sample's edge rate, the
    same draws for every ``lam``.  ``z'(1)`` is a central difference with
    step ``step`` improved by Richardson extrapolation from ``2 * step``.
    """
    if lambdas is None:
        lambdas = np.round(np.arange(0.5, 1.51, 0.1), 10)
    lambdas = np.unique(np.concatenate([np.asarray(lambdas, float),
                                        [1 - 2 * step, 1 - step, 1.0, 1 + step, 1 + 2 * step]]))
    m = len(taus)
    if m == 0:
        raise ValueError("no tau samples")
    reps = m if replicates is None else int(replicates)
    rng = np.random.default_rng([int(seed), 13])
    tau = taus.tau[np.arange(reps) % m]
    xi = rng.exponential(1.0 / taus.edge_rate, size=tau.shape)
    base = _zmin(tau, xi, 1.0)
    Z = np.column_stack([_zmin(tau, xi, lam) - base for lam in lambdas])
    Z[:, lambdas == 1.0] = 0.0

    def col(lam):
        return Z[:, int(np.argmin(np.abs(lambdas - lam)))]

    d1 = (col(1 + step) - col(1 - step)) / (2 * step)
    d2 = (col(1 + 2 * step) - col(1 - 2 * step)) / (4 * step)
    rich = (4 * d1 - d2) / 3
    arg = np.argmin(tau + xi, axis=1)
    pathwise = -xi[np.arange(reps), arg]
    se = Z.std(axis=0, ddof=1) / np.sqrt(reps)
    return ZLambdaEstimate(lambdas, Z.mean(axis=0), se, float(rich.mean()),
                           float(rich.std(ddof=1) / np.sqrt(reps)), float(pathwise.mean()), Z,
                           taus.edge_rate)


def conditional_g(shape: ShapeEstimate, z: ZLambdaEstimate, bins: int = 10,
                  points_per_bin: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Binned ``g(u) = -d/dlam E(V Z(lam) | U = u)`` at ``lam = 1``.

    Treats the neighbor gaps as independent of ``(U, V)``, so
    ``g(u) = -z'(1) V(u)`` averaged over each bin.  Returns ``(edges, g)``.
    """
    if shape.edge_rate != z.edge_rate:
        shape = shape.rescaled(z.edge_rate)
    edges = np.linspace(0.0, 1.0, bins + 1)
    g = np.empty(bins)
    for b in range(bins):
        u = np.linspace(edges[b], edges[b + 1], points_per_bin + 2)[1:-1]
        v = shape.V(u)
        v = v[np.isfinite(v)]
        if v.size == 0:
            raise ValueError(f"u-bin {b} has no usable growth-rate values")
        g[b] = -z.dz1 * v.mean()
    return edges, g


def nash_torus_nn(spec: RewardSpec, shape: ShapeEstimate, z: ZLambdaEstimate, N: int,
                  bins: int = 10) -> float:
    """Approximate Nash rate ``N^-1 int g(u) r(du)`` on the ``N x N`` torus.

    The result is a total calling rate (all 4 neighbors together) in the
    same units as the nearest-neighbor game's ``theta``.  A point mass of
    ``r`` at ``u = 1`` contributes nothing since growth stops there.
    """
    edges, g = conditional_g(shape, z, bins)
    total = 0.0
    for b in range(bins):
        total += g[b] * spec.mass(edges[b], edges[b + 1])
    return float(total / N)


# -- uniform rank law -----------------------------------------------------------------------

@dataclass
class UniformRankResult:
    ks: float
    pvalue: float
    u: np.ndarray               # N^-2 * (number informed when the first neighbor is reached)
    N: int


def uniform_rank_check(N: int = 128, replicates: int = 10000, seed: int = 0, *, at: str = "origin",
                       threads: int | None = None) -> UniformRankResult:
    """Normalized wetting count ``N^-2 Q`` of a fixed vertex under a uniform source.

    ``at="origin"``: ``Q`` is the number informed when the origin itself is
    wetted, i.e. the origin's rank, exactly uniform on ``{1, ..., N^2}``.
    ``at="first_neighbor"``: ``Q`` is counted when the first of the
    origin's four neighbors is wetted; this is uniform only as ``N -> inf``
    (it runs ahead of the origin's own count by O(N), a bias of order 1/N).
    Returns the Kolmogorov distance from Uniform(0, 1).
    """
    if at not in ("origin", "first_neighbor"):
        raise ValueError("at must be 'origin' or 'first_neighbor'")
    c = 0
    if at == "origin":
        targets = np.array([_vid(c, c, N)])
    else:
        targets = np.array([_vid(c + 1, c, N), _vid(c - 1, c, N), _vid(c, c + 1, N), _vid(c, c - 1, N)])
    watch = np.zeros(N * N, dtype=np.bool_)
    watch[targets] = True
    seeds = replicate_seeds(seed, replicates, stream=14)

    def one(s):
        src = int(np.random.default_rng([int(s), 1]).integers(N * N))
        q = _nn_run(N, 1.0, 1.0, -1, src, int(s), stop_mode=2, watch=watch)[4]
        return q

    qs = np.array(parallel.map_ordered(one, seeds, threads), dtype=float)
    u = qs / (N * N)
    res = stats.kstest(u, "uniform")
    return UniformRankResult(float(res.statistic), float(res.pvalue), u, int(N))
