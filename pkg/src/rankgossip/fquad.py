"""Limit law of short-long percolation on a large torus.

The fraction of agents informed by time ``t`` solves

    1 - F(t) = exp(-lam * int_{-inf}^t (t - s)^2 F(s) ds)

whose solution is unique up to a time shift.  ``solve_fquad`` computes it
on a uniform grid and centers it at ``F(0) = 1/2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = ["FquadSolution", "solve_fquad", "fquad_map", "fpp_limit_cdf", "left_tail_rate",
           "fquad_shooting_oracle"]


@dataclass
class FquadSolution:
    t: np.ndarray
    F: np.ndarray
    lam: float
    residual: float
    iterations: int
    projections: int            # monotone projections applied on the final sweep
    centering: str = "F(0)=1/2"

    def __call__(self, x):
        return np.interp(x, self.t, self.F, left=0.0, right=1.0)

    def quantile(self, q):
        return np.interp(q, self.F, self.t)

    def window_width(self, lo: float = 0.1, hi: float = 0.9) -> float:
        return float(self.quantile(hi) - self.quantile(lo))

    def density(self):
        return np.gradient(self.F, self.t)


def left_tail_rate(lam: float) -> float:
    """Exponent ``a`` of the left tail ``F(t) ~ C e^{a t}``, from ``a**3 = 2 lam``."""
    return (2.0 * lam) ** (1.0 / 3.0)


def _memory(F, h, lam):
    """``int_{-inf}^{t_j} (t_j - s)^2 F(s) ds`` on the grid by trapezoid moment sums.

    The part below the grid uses the exponential tail ``F[0] e^{a (s - t_0)}``.
    """
    tau = h * np.arange(F.size)

    def cum(y):
        return np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * h)])

    c0 = cum(F)
    c1 = cum(tau * F)
    c2 = cum(tau * tau * F)
    a = left_tail_rate(lam)
    tail = F[0] * (tau * tau / a + 2 * tau / a**2 + 2 / a**3)
    return tau * tau * c0 - 2 * tau * c1 + c2 + tail


def fquad_map(F, h, lam):
    """Right side ``1 - exp(-lam * memory)`` of the fixed-point equation."""
    return -np.expm1(-lam * _memory(F, h, lam))


def _center(t, F):
    k = int(np.searchsorted(F, 0.5))
    k = min(max(k, 1), F.size - 1)
    return t - (t[k - 1] + (0.5 - F[k - 1]) * (t[k] - t[k - 1]) / (F[k] - F[k - 1]))


def solve_fquad(lam: float = 1.0, *, t_min: float = -12.0, t_max: float = 6.0,
                h: float = 2.0**-8, damping: float = 0.5, tol: float = 1e-6,
                max_iter: int = 5000, init_shift: float = 0.0) -> FquadSolution:
    """Solve the fixed-point equation by damped iteration.

    Grid bounds and step are given at ``lam = 1`` and scaled by
    ``lam**(-1/3)``.  Iterates are projected onto nondecreasing sequences
    when needed; the count for the last sweep is reported.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    scale = lam ** (-1.0 / 3.0)
    hh = h * scale
    n = int(round((t_max - t_min) / h)) + 1
    t = (t_min + h * np.arange(n)) * scale
    F = special.expit((t / scale - init_shift) * 1.3)
    res = np.inf
    proj = 0
    for it in range(1, max_iter + 1):
        TF = fquad_map(F, hh, lam)
        res = float(np.max(np.abs(TF - F)))
        if res < tol:
            F = TF
            break
        new = (1 - damping) * F + damping * TF
        mono = np.maximum.accumulate(new)
        proj = int(np.any(mono != new))
        F = mono
    else:
        raise RuntimeError(f"fixed-point iteration did not converge, residual {res:.3g}")
    if np.any(np.diff(F) < 0):
        proj += 1
    if F[0] > 1e-4 or F[-1] < 1 - 1e-4:
        raise ValueError("grid too narrow: boundary values not in the tails")
    return FquadSolution(_center(t, F), F, float(lam), res, it, proj)


@lru_cache(maxsize=4)
def _unit_solution() -> FquadSolution:
    return solve_fquad(1.0)


def fpp_limit_cdf(theta_near: float, theta_far: float, area: float):
    """``t -> F_1(A^(1/3) theta_far^(1/3) theta_near^(2/3) t)`` with ``F_1`` the unit solution.

    ``area`` is the limit-shape area for nearest-neighbor percolation with
    rate 1/4 per directed edge.
    """
    if min(theta_near, theta_far, area) <= 0:
        raise ValueError("rates and area must be positive")
    sol = _unit_solution()
    k = (area * theta_far) ** (1.0 / 3.0) * theta_near ** (2.0 / 3.0)

    def cdf(x):
        return sol(k * np.asarray(x, dtype=float))

    cdf.time_scale = 1.0 / k
    cdf.solution = sol
    return cdf


def fquad_shooting_oracle(lam: float = 1.0, *, t0: float = -14.0, t1: float = 8.0, f0: float = 1e-7):
    """Independent solution from the equivalent third-order ODE.

    With ``y = -log(1 - F)`` the equation reads ``y''' = 2 lam (1 - e^{-y})``;
    it is started on the exponential left tail and integrated with
    ``solve_ivp``.  Returns ``(t, F)`` centered at ``F(0) = 1/2``.
    """
    a = left_tail_rate(lam)
    y0 = [f0, a * f0, a * a * f0]

    def rhs(_, y):
        return [y[1], y[2], -2 * lam * np.expm1(-y[0])]

    tt = np.linspace(t0, t1, 20001) * lam ** (-1 / 3)
    sol = integrate.solve_ivp(rhs, (tt[0], tt[-1]), y0, t_eval=tt, rtol=1e-11, atol=1e-14,
                              method="DOP853")
    F = -np.expm1(-sol.y[0])
    return _center(sol.t, F), F
