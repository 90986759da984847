"""Rank-based reward functions.

A reward function ``R(u)`` on ``(0, 1]`` pays the agent whose normalized
rank is ``u``.  Every family here is stored through its reward measure
``r = -dR``: a piecewise-constant density plus point masses (atoms).  With
the convention ``R(u) = r([u, 1])`` for ``u < 1`` and ``R(1) = 0`` this
covers the linear, threshold and constant families and monotone tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "RewardSpec",
    "FiniteKReward",
    "eval_R",
    "eval_rbar",
    "reward_from_config",
]

FAMILIES = ("linear", "threshold", "constant", "table")


@dataclass(frozen=True)
class RewardSpec:
    """A reward family with its parameters.

    Use the classmethod constructors rather than building instances by hand.
    """

    family: str
    params: tuple = ()
    # (a, b, density) segments of the absolutely continuous part of r
    pieces: tuple = field(default=(), repr=False, compare=False)
    # (u, mass) point masses of r
    atoms: tuple = field(default=(), repr=False, compare=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def linear(cls, height: float = 2.0) -> "RewardSpec":
        """``R(u) = height * (1 - u)``; the default has mean reward 1."""
        if not height > 0:
            raise ValueError(f"linear reward height must be positive, got {height}")
        return cls("linear", (float(height),), pieces=((0.0, 1.0, float(height)),))

    @classmethod
    def threshold(cls, u0: float) -> "RewardSpec":
        """``R(u) = 1{u <= u0} / u0``: the first fraction ``u0`` share the pot."""
        if not 0 < u0 <= 1:
            raise ValueError(f"threshold u0 must lie in (0, 1], got {u0}")
        return cls("threshold", (float(u0),), atoms=((float(u0), 1.0 / u0),))

    @classmethod
    def constant(cls, c: float = 1.0) -> "RewardSpec":
        """``R = c`` on ``(0, 1)`` and ``R(1) = 0``.

        Boundary case: R is not strictly decreasing, so it sits outside the
        admissible class (see :attr:`in_props`).  The only payment it makes
        depends on not being the very last recipient.
        """
        if not c > 0:
            raise ValueError(f"constant reward must be positive, got {c}")
        return cls("constant", (float(c),), atoms=((1.0, float(c)),))

    @classmethod
    def table(cls, u, values) -> "RewardSpec":
        """Monotone piecewise-linear interpolation through ``(u_i, R_i)``.

        Knots must start at 0, end at 1 and increase strictly; values must be
        nonincreasing and nonnegative.  A nonzero final value is read as a
        jump to ``R(1) = 0``.
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(values, dtype=float)
        if u.ndim != 1 or u.shape != v.shape or u.size < 2:
            raise ValueError("table needs matching 1-d knot and value arrays")
        if u[0] != 0.0 or u[-1] != 1.0:
            raise ValueError("table knots must span [0, 1]")
        if np.any(np.diff(u) <= 0):
            raise ValueError("table knots must be strictly increasing")
        if np.any(np.diff(v) > 0):
            raise ValueError("table values must be nonincreasing")
        if np.any(v < 0):
            raise ValueError("table values must be nonnegative")
        pieces = []
        for a, b, ra, rb in zip(u[:-1], u[1:], v[:-1], v[1:]):
            dens = (ra - rb) / (b - a)
            if dens > 0:
                pieces.append((float(a), float(b), float(dens)))
        atoms = ((1.0, float(v[-1])),) if v[-1] > 0 else ()
        params = tuple(float(x) for x in np.concatenate([u, v]))
        return cls("table", params, pieces=tuple(pieces), atoms=atoms)

    # -- evaluation -------------------------------------------------------

    @property
    def in_props(self) -> bool:
        """True when R is decreasing with ``R(1) = 0`` and ``0 < Rbar < inf``."""
        return self.family != "constant" and 0 < self.rbar() < np.inf

    def R(self, u):
        """Reward at normalized rank ``u`` (vectorized, domain ``(0, 1]``)."""
        u_arr = np.asarray(u, dtype=float)
        if np.any(~(u_arr > 0)) or np.any(u_arr > 1):
            raise ValueError("reward is defined for 0 < u <= 1")
        out = np.zeros_like(u_arr)
        for a, b, dens in self.pieces:
            out += dens * np.clip(b - np.maximum(u_arr, a), 0.0, None)
        for loc, mass in self.atoms:
            out += np.where(u_arr <= loc, mass, 0.0)
        out = np.where(u_arr >= 1.0, 0.0, out)
        return out if out.ndim else float(out)

    def rbar(self) -> float:
        """``Rbar = int_0^1 R(u) du = int_0^1 u r(u) du`` (exact)."""
        total = sum(mass * loc for loc, mass in self.atoms)
        total += sum(dens * (b * b - a * a) / 2 for a, b, dens in self.pieces)
        return float(total)

    def rank_table(self, n: int) -> np.ndarray:
        """``R(j/n)`` for ``j = 1..n``, returned with index ``j`` (entry 0 unused)."""
        out = np.zeros(n + 1)
        out[1:] = self.R(np.arange(1, n + 1) / n)
        return out

    def stieltjes(self, f, *, epsabs: float = 1e-12, epsrel: float = 1e-12) -> float:
        """``int f(u) r(u) du`` with atoms summed exactly.

        ``f`` is integrated in the variable ``v = 1 - u`` so that a log
        singularity at ``u = 1`` sits at the left end of the quadrature range.
        """
        total = 0.0
        for loc, mass in self.atoms:
            total += mass * float(f(loc))
        for a, b, dens in self.pieces:
            val, _ = integrate.quad(
                lambda v: f(1.0 - v), 1.0 - b, 1.0 - a,
                epsabs=epsabs, epsrel=epsrel, limit=200,
            )
            total += dens * val
        return float(total)

    def integrate_R(self, f, *, epsabs: float = 1e-12, epsrel: float = 1e-12) -> float:
        """``int_0^1 f(u) R(u) du`` by adaptive quadrature (again in ``v = 1 - u``)."""
        breaks = sorted({1.0 - a for a, _, _ in self.pieces}
                        | {1.0 - b for _, b, _ in self.pieces}
                        | {1.0 - loc for loc, _ in self.atoms})
        breaks = [p for p in breaks if 0.0 < p < 1.0]
        val, _ = integrate.quad(
            lambda v: f(1.0 - v) * self.R(1.0 - v) if v > 0 else 0.0,
            0.0, 1.0, points=breaks or None,
            epsabs=epsabs, epsrel=epsrel, limit=400,
        )
        return float(val)

    def mass(self, lo: float, hi: float, *, include_hi: bool = False) -> float:
        """r-measure of ``[lo, hi)`` (or ``[lo, hi]``)."""
        total = 0.0
        for a, b, dens in self.pieces:
            total += dens * max(0.0, min(b, hi) - max(a, lo))
        for loc, m in self.atoms:
            if lo <= loc < hi or (include_hi and loc == hi):
                total += m
        return total

    def to_config(self) -> dict:
        return {"family": self.family, "params": list(self.params)}


@dataclass(frozen=True)
class FiniteKReward:
    """Only the first ``k`` recipients are paid, ``w_n`` each.

    With ``w_n = n / k`` the total paid per item is ``n``, matching the
    normalization ``Rbar = 1``.
    """

    k: int
    w: float | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("finite-k rewards need k >= 2")
        if self.w is not None and not self.w > 0:
            raise ValueError("reward amount must be positive")

    def amount(self, n: int) -> float:
        return self.w if self.w is not None else n / self.k

    def as_reward_spec(self, n: int) -> RewardSpec:
        """The equivalent threshold reward on ``n`` agents (requires ``w = n/k``)."""
        if self.k >= n:
            raise ValueError(f"need k < n, got k={self.k}, n={n}")
        if self.w is not None and not np.isclose(self.w, n / self.k):
            raise ValueError("only the normalized amount w = n/k maps to a threshold reward")
        return RewardSpec.threshold(self.k / n)


def eval_R(spec: RewardSpec, u: float) -> float:
    return spec.R(u)


def eval_rbar(spec: RewardSpec) -> float:
    val = spec.rbar()
    if not np.isfinite(val):
        raise ValueError("mean reward integral diverges")
    return val


def reward_from_config(cfg) -> RewardSpec:
    """Build a reward from ``{"family": tag, "params": [...]}`` or ``"tag"``."""
    if isinstance(cfg, str):
        cfg = {"family": cfg, "params": []}
    family = cfg.get("family")
    params = list(cfg.get("params", []))
    if family == "linear":
        return RewardSpec.linear(*params)
    if family == "threshold":
        return RewardSpec.threshold(*params)
    if family == "constant":
        return RewardSpec.constant(*params)
    if family == "table":
        if len(params) % 2 or len(params) < 4:
            raise ValueError("table params are knots followed by values")
        half = len(params) // 2
        return RewardSpec.table(params[:half], params[half:])
    if family == "finite_k":
        k, n = int(params[0]), int(params[1])
        return FiniteKReward(k).as_reward_spec(n)
    raise ValueError(f"unknown reward family {family!r}; expected one of {FAMILIES + ('finite_k',)}")
