"""Network cost models and calling strategies."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

KINDS = ("complete", "torus_nn", "short_long", "distance_cost")


@lru_cache(maxsize=64)
def torus_shells(N: int, d_max: int):
    """Offsets ``(dx, dy)`` at torus L1 distance ``1..d_max``.

    Returns ``(dx, dy, shell)`` int64 arrays (``shell = d - 1``) and the
    shell sizes.  Each torus vertex appears once, so small tori do not
    double count wrapped neighbors.
    """
    rng = np.arange(-(N // 2), N - N // 2)
    dx, dy = np.meshgrid(rng, rng, indexing="ij")
    dx, dy = dx.ravel(), dy.ravel()
    d = np.abs(dx) + np.abs(dy)
    keep = (d >= 1) & (d <= d_max)
    order = np.lexsort((dy[keep], dx[keep], d[keep]))
    sdx = dx[keep][order].astype(np.int64)
    sdy = dy[keep][order].astype(np.int64)
    shell = (d[keep][order] - 1).astype(np.int64)
    sizes = np.bincount(shell, minlength=d_max).astype(np.int64)
    for arr in (sdx, sdy, shell, sizes):
        arr.setflags(write=False)
    return sdx, sdy, shell, sizes


def torus_max_distance(N: int) -> int:
    return 2 * (N // 2)


@dataclass(frozen=True)
class Topology:
    """Who can call whom and at what cost per call.

    ``size`` is the agent count ``n`` for the complete graph and the side
    ``N`` for torus kinds.  ``c_far`` is the non-neighbor call cost of the
    short-long torus; ``costs[d-1]`` is the cost of a call at distance ``d``
    on the distance-cost torus.
    """

    kind: str
    size: int
    c_far: float = 1.0
    costs: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown topology {self.kind!r}")
        if self.kind == "complete" and self.size < 2:
            raise ValueError("complete graph needs n >= 2")
        if self.kind != "complete" and self.size < 2:
            raise ValueError("torus needs N >= 2")
        if self.kind == "short_long":
            if self.size < 3:
                raise ValueError("short-long torus needs N >= 3 so non-neighbors exist")
            if not self.c_far >= 1:
                raise ValueError(f"c_N must be >= 1, got {self.c_far}")
        if self.kind == "distance_cost":
            c = np.asarray(self.costs, dtype=float)
            if c.size == 0 or c[0] != 1.0:
                raise ValueError("distance costs need c(1) = 1")
            if np.any(np.diff(c) < 0):
                raise ValueError("distance costs must be nondecreasing")

    @classmethod
    def complete(cls, n: int) -> "Topology":
        return cls("complete", int(n))

    @classmethod
    def torus_nn(cls, N: int) -> "Topology":
        return cls("torus_nn", int(N))

    @classmethod
    def short_long(cls, N: int, c_far: float) -> "Topology":
        return cls("short_long", int(N), c_far=float(c_far))

    @classmethod
    def distance_cost(cls, N: int, cost) -> "Topology":
        """``cost`` is a sequence ``c(1), c(2), ...`` or a callable ``c(d)``."""
        dmax = torus_max_distance(int(N))
        if callable(cost):
            table = tuple(float(cost(d)) for d in range(1, dmax + 1))
        else:
            table = tuple(float(x) for x in cost)
        return cls("distance_cost", int(N), costs=table)

    @property
    def n_agents(self) -> int:
        return self.size if self.kind == "complete" else self.size * self.size

    @property
    def is_torus(self) -> bool:
        return self.kind != "complete"

    def n_far(self) -> int:
        """Number of non-neighbors of an agent on the short-long torus."""
        _, _, _, sizes = torus_shells(self.size, 1)
        return self.size * self.size - 1 - int(sizes[0])

    def channel_costs(self, n_channels: int) -> np.ndarray:
        """Cost per unit calling rate for each strategy coordinate."""
        if self.kind in ("complete", "torus_nn"):
            return np.ones(1)
        if self.kind == "short_long":
            return np.array([1.0, self.c_far])
        if n_channels > len(self.costs):
            raise ValueError(f"cost table covers d <= {len(self.costs)}, need {n_channels}")
        return np.asarray(self.costs[:n_channels], dtype=float)

    def check_profile(self, profile: "StrategyProfile", *, allow_zero: bool = False):
        rates = np.asarray(profile.rates, dtype=float)
        if np.any(~np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("calling rates must be finite and nonnegative")
        if self.kind in ("complete", "torus_nn") and rates.size != 1:
            raise ValueError(f"{self.kind} strategies are a single rate")
        if self.kind == "short_long" and rates.size != 2:
            raise ValueError("short-long strategies are (theta_near, theta_far)")
        if self.kind == "distance_cost":
            if rates.size == 0 or rates.size > torus_max_distance(self.size):
                raise ValueError("distance strategy length must be in 1..max torus distance")
            self.channel_costs(rates.size)
        if not allow_zero and not np.any(rates > 0):
            raise ValueError("at least one calling rate must be positive")

    def to_config(self) -> dict:
        out = {"kind": self.kind, "size": self.size}
        if self.kind == "short_long":
            out["c_far"] = self.c_far
        if self.kind == "distance_cost":
            out["costs"] = list(self.costs)
        return out


@dataclass(frozen=True)
class StrategyProfile:
    """Calling rates: ``(theta,)``, ``(theta_near, theta_far)`` or ``theta(d)``."""

    rates: tuple

    @classmethod
    def scalar(cls, theta: float) -> "StrategyProfile":
        return cls((float(theta),))

    @classmethod
    def near_far(cls, near: float, far: float) -> "StrategyProfile":
        return cls((float(near), float(far)))

    @classmethod
    def by_distance(cls, rates) -> "StrategyProfile":
        return cls(tuple(float(x) for x in rates))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.rates, dtype=float)

    def scaled(self, c: float) -> "StrategyProfile":
        return StrategyProfile(tuple(c * r for r in self.rates))

    def call_cost(self, topology: Topology) -> float:
        """Expected calling cost per unit time."""
        return float(self.array @ topology.channel_costs(len(self.rates)))


@dataclass(frozen=True)
class EgoDeviation:
    """One agent uses its own rates (same shape as the population's)."""

    agent: int
    profile: StrategyProfile
