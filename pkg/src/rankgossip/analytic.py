"""Complete-graph theory in the many-agents limit, plus a few exact finite-n formulas.

Everyone calls a uniform random agent at rate ``theta``; ego calls at
``phi``.  In the limit ego's normalized rank ``U`` has
``P(U <= u) = 1 - (1 - u)**(phi/theta)``, which drives the payoff and the
Nash rate formulas below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .reward import RewardSpec

__all__ = [
    "LogisticLaw",
    "DeviantLaw",
    "g_function",
    "payoff_cg",
    "payoff_cg_finite",
    "rank_law_finite",
    "nash_cg",
    "nash_finite_k",
    "prob_second",
    "nash_symmetric",
    "nash_audience",
    "audience_series",
    "RegularCallsSolution",
    "regular_calls_fixed_point",
    "regular_calls_delay_oracle",
]


@dataclass(frozen=True)
class LogisticLaw:
    """Recentered receipt-time law ``F_theta(x) = F_1(theta x)``."""

    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    def cdf(self, x):
        return special.expit(self.theta * np.asarray(x, dtype=float))

    def quantile(self, q):
        return special.logit(np.asarray(q, dtype=float)) / self.theta

    def window_width(self, lo: float = 0.1, hi: float = 0.9) -> float:
        """``2 log 9 / theta`` for the default quantiles."""
        return float(self.quantile(hi) - self.quantile(lo))


@dataclass(frozen=True)
class DeviantLaw:
    """Receipt-time law of an agent calling at ``phi`` among agents calling at ``theta``."""

    phi: float
    theta: float

    def cdf(self, x):
        F = LogisticLaw(self.theta).cdf(x)
        return 1.0 - (1.0 - F) ** (self.phi / self.theta)

    def rank_cdf(self, u):
        """``P(U <= u)`` for ego's normalized rank."""
        u = np.asarray(u, dtype=float)
        return 1.0 - (1.0 - u) ** (self.phi / self.theta)


def g_function(u):
    """``g(u) = -(1-u) log(1-u)`` with ``g(0) = g(1) = 0``."""
    u = np.asarray(u, dtype=float)
    v = 1.0 - u
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(v > 0, -v * np.log(np.where(v > 0, v, 1.0)), 0.0)
    return out if out.ndim else float(out)


def payoff_cg(spec: RewardSpec, phi: float, theta: float) -> float:
    """Limit payoff ``-phi + int r(u) (1 - (1-u)^(phi/theta)) du``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    if phi < 0:
        raise ValueError("phi must be nonnegative")
    if phi == 0:
        return 0.0
    a = phi / theta
    # 1 - (1-u)^a written with expm1/log1p keeps precision near u = 0
    reward = spec.stieltjes(lambda u: -np.expm1(a * np.log1p(-u)) if u < 1 else 1.0)
    return reward - phi


def rank_law_finite(n: int, phi: float, theta: float) -> np.ndarray:
    """Exact law of ego's rank on the complete graph with ``n`` agents.

    Returns ``p`` with ``p[j] = P(rank = j)`` for ``j = 1..n`` (entry 0 unused),
    the source being uniform.  ``p`` sums to less than one when ``phi = 0``
    (ego is then informed only as the source).  While ``m`` other agents are
    informed ego is next with chance ``phi / (phi + (n-1-m) theta)``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not theta > 0 or phi < 0:
        raise ValueError("need theta > 0 and phi >= 0")
    m = np.arange(1, n)
    denom = phi + (n - 1 - m) * theta
    p_m = np.divide(phi, denom, out=np.zeros(m.size), where=denom > 0)
    stay = np.concatenate([[1.0], np.cumprod(1.0 - p_m)[:-1]])
    out = np.zeros(n + 1)
    out[1] = 1.0 / n
    out[2:] = (n - 1) / n * stay * p_m
    return out


def payoff_cg_finite(spec: RewardSpec, phi: float, theta: float, n: int) -> float:
    """Exact expected payoff to ego on the ``n``-agent complete graph."""
    p = rank_law_finite(n, phi, theta)
    return float(p @ spec.rank_table(n)) - phi


def nash_cg(spec: RewardSpec, *, tol: float = 1e-8) -> float:
    """Limit Nash rate ``int r(u) g(u) du``.

    The value is cross-checked against ``int (1 + log(1-u)) R(u) du``; the
    two agree when the first-order condition at ``phi = theta`` holds.
    """
    theta = spec.stieltjes(g_function)
    alt = spec.integrate_R(lambda u: 1.0 + np.log1p(-u))
    if abs(theta - alt) > tol * max(1.0, abs(theta)):
        raise ArithmeticError(f"Nash criterion check failed: {theta!r} vs {alt!r}")
    return float(theta)


def nash_finite_k(n: int, k: int, w: float | None = None, *, include_source: bool = False):
    """Nash rate and payoff when the first ``k`` recipients get ``w`` each.

    ``w`` defaults to ``n / k`` (total reward ``n`` per item).  The marginal
    value of calling is ``w (n-k)/(n-1) sum_{m=1}^{k-1} 1/((n-m) theta)``,
    giving the closed form below; for ``k = 2`` it is
    ``(n-2) w / (n-1)**2``.  With ``include_source`` the factor ``(n-1)/n``
    (ego is not the source) is kept, which changes only ``O(1/n)`` terms.

    Returns ``(theta, payoff)`` with ``payoff = k w / n - theta``.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    if k >= n:
        raise ValueError(f"need k < n, got k={k}, n={n}")
    w = n / k if w is None else float(w)
    m = np.arange(1, k)
    theta = w * (n - k) / (n - 1) * float(np.sum(1.0 / (n - m)))
    if include_source:
        theta *= (n - 1) / n
    return theta, k * w / n - theta


def prob_second(n: int, phi: float, theta: float) -> float:
    """Chance ego is the second to learn, given another agent is the source."""
    if n < 3:
        raise ValueError("need n >= 3")
    if phi < 0 or theta < 0 or phi + theta == 0:
        raise ValueError("rates must be nonnegative and not both zero")
    return phi / (phi + (n - 2) * theta)


def nash_symmetric(theta_asy: float) -> float:
    """Nash rate when both parties of a call exchange items."""
    if theta_asy < 0:
        raise ValueError("rate must be nonnegative")
    return theta_asy / 2


def nash_audience(c: float) -> float:
    """Nash rate when an agent earns ``c`` per agent who learns from it.

    Evaluates ``-c int_0^1 (1-y)/y log(1-y) dy``.
    """
    if not c > 0:
        raise ValueError("reward per listener must be positive")

    def f(y):
        return -(1.0 - y) * np.log1p(-y) / y if 0 < y < 1 else (1.0 if y == 0 else 0.0)

    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    return c * val


def audience_series(c: float = 1.0, terms: int = 200000) -> float:
    """Independent evaluation of ``nash_audience`` from ``sum 1/(m^2 (m+1))``.

    The tail beyond ``terms`` is added from its Euler-Maclaurin expansion.
    """
    m = np.arange(1, terms + 1, dtype=float)
    head = np.sum((1.0 / (m * m * (m + 1)))[::-1])
    M = float(terms)
    # sum_{m>M} m^-3 - m^-4 + m^-5 ... to enough order
    tail = 1 / (2 * M**2) - 1 / (2 * M**3) - 1 / (3 * M**3) + 1 / (2 * M**4)
    return c * (head + tail)


# -- regular calling intervals -------------------------------------------------

@dataclass
class RegularCallsSolution:
    """Receipt-time CDF for the regular-interval strategy, centered at ``F(0) = 1/2``."""

    t: np.ndarray
    F: np.ndarray
    theta: float
    residual: float
    iterations: int

    def __call__(self, x):
        return np.interp(x, self.t, self.F, left=0.0, right=1.0)


def _center(t, F):
    """Shift the grid labels so that ``F`` crosses 1/2 at 0."""
    k = int(np.searchsorted(F, 0.5))
    k = min(max(k, 1), F.size - 1)
    t_half = t[k - 1] + (0.5 - F[k - 1]) * (t[k] - t[k - 1]) / (F[k] - F[k - 1])
    return t - t_half


def _regular_map(F, M, h):
    """Right side of the fixed-point equation at ``theta = 1`` on a uniform grid.

    ``M`` grid steps make one calling period.  Below the grid ``F`` is
    continued as ``F[0] exp(t - t_0)``.
    """
    n = F.size
    logq = np.log(np.maximum(1.0 - F, 1e-300))
    logP = logq.copy()
    # stride-M running sums give log prod_{i>=0} (1 - F(s - i))
    for start in range(M):
        logP[start::M] = np.cumsum(logq[start::M])
    # lags that fall below the grid: geometric tail of the exponential continuation
    first = np.arange(n) % M
    tail_first = F[0] * np.exp((first - M) * h)
    logP += -tail_first / (1.0 - np.exp(-1.0))
    P = np.exp(logP)
    # int_{t-1}^{t} P ds by trapezoid over the last M intervals
    cs = np.concatenate([[0.0], np.cumsum(0.5 * (P[1:] + P[:-1]) * h)])
    out = np.empty(n)
    out[M:] = cs[M:] - cs[:-M]
    # below the grid P ~ 1 - F0 e^{s - t0} / (1 - e^-1) to first order
    j = np.arange(M)
    below = (M - j) * h
    lost = below + F[0] * np.expm1(-below) / (1.0 - np.exp(-1.0))
    out[:M] = cs[:M] + lost
    return 1.0 - out


def regular_calls_fixed_point(theta: float = 1.0, *, t_min: float = -14.0, t_max: float = 10.0,
                              steps_per_period: int = 256, damping: float = 0.5,
                              tol: float = 1e-6, max_iter: int = 20000) -> RegularCallsSolution:
    """Receipt-time law when every agent calls at ``U + k/theta``.

    Solves ``1 - F(t) = int_{t-1/theta}^t prod_{i>=0} (1 - F(s - i/theta)) theta ds``
    by damped iteration from the logistic law.  The solution is computed at
    ``theta = 1`` and rescaled (time ``t/theta``).  Grid bounds are in
    units of the calling period.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    h = 1.0 / steps_per_period
    t = t_min + h * np.arange(int(round((t_max - t_min) / h)) + 1)
    F = special.expit(1.5 * t)
    res = np.inf
    for it in range(1, max_iter + 1):
        TF = np.clip(_regular_map(F, steps_per_period, h), 0.0, 1.0)
        res = float(np.max(np.abs(TF - F)))
        if res < tol:
            F = TF
            break
        F = np.maximum.accumulate((1 - damping) * F + damping * TF)
    else:
        raise RuntimeError(f"regular-calls iteration did not converge (residual {res:.3g})")
    if F[0] > 1e-3 or F[-1] < 1 - 1e-3:
        raise ValueError("grid too narrow for the regular-calls solution")
    tc = _center(t, F)
    return RegularCallsSolution(tc / theta, F, float(theta), res, it)


def regular_calls_delay_oracle(theta: float = 1.0, *, steps_per_period: int = 2000,
                               t_span: float = 40.0, f0: float = 1e-9) -> RegularCallsSolution:
    """Same law from the delay equation ``F' = theta F(t) P(t - 1/theta)``.

    ``P(s) = prod_{i>=0} (1 - F(s - i/theta))``.  Integrated with Heun's method
    from a tiny exponential seed; used as an independent check.
    """
    M = steps_per_period
    h = 1.0 / M
    n = int(t_span * M)
    F = np.empty(n + 1)
    logP = np.zeros(n + 1)
    F[0] = f0

    def lag_P(i):
        return np.exp(logP[i - M]) if i >= M else 1.0

    logP[0] = np.log1p(-F[0])
    for i in range(n):
        Pl = lag_P(i)
        k1 = F[i] * Pl
        Fp = F[i] + h * k1
        k2 = Fp * lag_P(i + 1)
        F[i + 1] = min(F[i] + 0.5 * h * (k1 + k2), 1.0)
        logP[i + 1] = np.log1p(-min(F[i + 1], 1 - 1e-300)) + (logP[i + 1 - M] if i + 1 >= M else 0.0)
    t = h * np.arange(n + 1)
    return RegularCallsSolution(_center(t, F) / theta, F, float(theta), float("nan"), n)
