"""Degree-class mean-field dynamics, critical thresholds and stationary fractions.

The state is x(k), the infected fraction among degree-k nodes, indexed by
the degree classes present in a :class:`~netdiffusion.graph.DegreeStats`.
One tick of the recursion is

    x(k) <- x(k) + (c_k / M) * [(1 - x(k)) * nu * k * theta / D - delta * x(k)]

with theta the infected probability of an observed node (theta_X for
non-monophilic, theta_Z for monophilic) and c_k the relative activation rate
of class k (1 for X, k / kbar for Y, P(d(Z) = k) / P(k) for Z).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .graph import DegreeStats


class NumericalError(ArithmeticError):
    """An iterate left [0, 1] or a solver failed to converge."""


def _norm_activation(a: str) -> str:
    table = {"X": "X", "uniform-X": "X", "Y": "Y", "random-friend-Y": "Y",
             "Z": "Z", "friend-of-node-Z": "Z"}
    if a not in table:
        raise ValueError(f"unknown activation {a!r}")
    return table[a]


def _check_rule(rule: str) -> str:
    if rule not in ("non-monophilic", "monophilic"):
        raise ValueError(f"unknown rule {rule!r}")
    return rule


@dataclass(frozen=True)
class MfdParams:
    nu: float
    delta: float
    stats: DegreeStats
    activation: str = "X"
    rule: str = "non-monophilic"
    M: int | None = None
    D: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu must lie in [0, 1], got {self.nu}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        _norm_activation(self.activation)
        _check_rule(self.rule)
        if self.D is not None and self.D < self.stats.max_degree:
            raise ValueError("D is below the maximum degree of the graph")
        if self.M is not None and self.M <= 0:
            raise ValueError("M must be positive")

    @property
    def size(self) -> float:
        return float(self.stats.n if self.M is None else self.M)

    @property
    def max_degree(self) -> int:
        return int(self.stats.max_degree if self.D is None else self.D)

    @property
    def spreading_rate(self) -> float:
        return self.nu / self.delta

    @property
    def weights(self) -> np.ndarray:
        return observation_weights(self.stats, self.rule)

    @property
    def multipliers(self) -> np.ndarray:
        return activation_multiplier(self.stats, self.activation)


def theta_X(x, stats: DegreeStats) -> float:
    return float(stats.P @ np.asarray(x, dtype=float))


def theta_Z(x, stats: DegreeStats) -> float:
    return float(stats.z_weights @ np.asarray(x, dtype=float))


def observation_weights(stats: DegreeStats, rule: str) -> np.ndarray:
    """w_k such that theta = sum_k w_k x(k) for the given rule."""
    return stats.P if _check_rule(rule) == "non-monophilic" else stats.z_weights


def activation_multiplier(stats: DegreeStats, activation: str) -> np.ndarray:
    """Per-class activation rate relative to uniform activation."""
    a = _norm_activation(activation)
    if a == "X":
        return np.ones(len(stats.ks))
    if a == "Y":
        return stats.ks / stats.mean_degree
    return stats.z_weights / stats.P


def viral_p01(ks, theta, nu, D):
    return nu * ks * theta / D


@njit(cache=True)
def _mfd_kernel(x0, ks, w, c, nu, delta, D, M, ticks, record_every, out):
    x = x0.copy()
    out[0] = x
    a = c / M
    lo, hi = 0.0, 0.0
    for t in range(ticks):
        theta = 0.0
        for j in range(x.shape[0]):
            theta += w[j] * x[j]
        for j in range(x.shape[0]):
            x[j] += a[j] * ((1.0 - x[j]) * nu * ks[j] * theta / D - delta * x[j])
            if x[j] < lo:
                lo = x[j]
            if x[j] > hi:
                hi = x[j]
        if (t + 1) % record_every == 0:
            out[(t + 1) // record_every] = x
    return lo, hi


def mfd_step(x, params: MfdParams, ticks: float = 1.0,
             p01: Callable | None = None, p10: Callable | None = None) -> np.ndarray:
    """Advance the recursion by ``ticks`` (the step size is ticks * c_k / M).

    ``p01(ks, theta)`` and ``p10(ks, theta)`` replace the viral transition
    probabilities nu*k*theta/D and delta when given.
    """
    x = np.asarray(x, dtype=float)
    st = params.stats
    theta = float(params.weights @ x)
    up = p01(st.ks, theta) if p01 else viral_p01(st.ks, theta, params.nu, params.max_degree)
    down = p10(st.ks, theta) if p10 else params.delta
    return x + ticks * params.multipliers / params.size * ((1 - x) * up - down * x)


def _check_range(lo, hi):
    if lo < -1e-12 or hi > 1 + 1e-12:
        raise NumericalError(f"mean-field iterate left [0, 1] (min {lo:.3g}, max {hi:.3g}); "
                             "the step c_k/M is too large")


def mfd_trajectory(params: MfdParams, x0, sweeps: float, record_every: int | None = None,
                   p01: Callable | None = None, p10: Callable | None = None) -> np.ndarray:
    """Iterate for ``sweeps * M`` ticks; rows are x at every ``record_every`` ticks.

    ``record_every`` defaults to one sweep (M ticks, rounded).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != params.stats.ks.shape:
        raise ValueError("x0 must have one entry per degree class")
    if np.any(x0 < 0) or np.any(x0 > 1):
        raise ValueError("x0 must lie in [0, 1]")
    M = params.size
    ticks = int(round(sweeps * M))
    rec = max(int(round(M)), 1) if record_every is None else int(record_every)
    if rec < 1:
        raise ValueError("record_every must be >= 1")
    out = np.empty((ticks // rec + 1, len(x0)))
    if p01 is None and p10 is None:
        lo, hi = _mfd_kernel(x0, params.stats.ks.astype(float), params.weights,
                             params.multipliers, float(params.nu), float(params.delta),
                             float(params.max_degree), float(M), ticks, rec, out)
        _check_range(lo, hi)
        return out
    x = x0.copy()
    out[0] = x
    for t in range(ticks):
        x = mfd_step(x, params, 1.0, p01, p10)
        _check_range(x.min(), x.max())
        if (t + 1) % rec == 0:
            out[(t + 1) // rec] = x
    return out


@dataclass(frozen=True)
class ThresholdResult:
    lambda_star: float
    rule: str
    mean_observed_degree: float
    D: int


def critical_threshold(stats: DegreeStats, rule: str = "non-monophilic",
                       D: int | None = None) -> ThresholdResult:
    """lambda* = D / E[d(X)] (non-monophilic) or D / E[d(Z)] (monophilic)."""
    w = observation_weights(stats, rule)
    D = stats.max_degree if D is None else int(D)
    mean_k = float(stats.ks @ w)
    return ThresholdResult(lambda_star=D / mean_k, rule=rule,
                           mean_observed_degree=mean_k, D=D)


@dataclass(frozen=True)
class StationaryState:
    rho: float
    theta: float
    x: np.ndarray
    iterations: int


def stationary_state(stats: DegreeStats, lam: float, rule: str = "non-monophilic",
                     D: int | None = None, tol: float = 1e-15,
                     max_iter: int = 200) -> StationaryState:
    """Positive fixed point of the recursion, or the zero state when lam <= lambda*.

    Bisection on theta in (0, 1] for theta = sum_k w_k f_k(theta) with
    f_k(theta) = (lam k theta / D) / (1 + lam k theta / D). The map is concave
    with value 0 at theta = 0, so a positive root exists iff its slope at 0,
    lam * sum_k w_k k / D, exceeds 1.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    w = observation_weights(stats, rule)
    ks = stats.ks.astype(float)
    D = stats.max_degree if D is None else int(D)
    zero = np.zeros(len(ks))
    if not np.isfinite(lam) or lam * (w @ ks) / D <= 1.0:
        if np.isinf(lam):
            return StationaryState(1.0, 1.0, np.ones(len(ks)), 0)
        return StationaryState(0.0, 0.0, zero, 0)

    def excess(theta):
        r = lam * ks * theta / D
        return w @ (r / (1 + r)) - theta

    lo, hi = 0.0, 1.0
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        val = excess(mid)
        if not np.isfinite(val):
            raise NumericalError(f"non-finite residual at theta={mid}")
        if val > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    if hi - lo > tol:
        raise NumericalError(f"bisection stopped at width {hi - lo:.3g} after {it} steps")
    theta = 0.5 * (lo + hi)
    r = lam * ks * theta / D
    x = r / (1 + r)
    return StationaryState(float(stats.P @ x), float(theta), x, it)


def stationary_fraction(params: MfdParams) -> float:
    """Stationary infected fraction rho at lambda = nu / delta."""
    return stationary_state(params.stats, params.spreading_rate, params.rule,
                            params.max_degree).rho


def bifurcation_scan(stats: DegreeStats, rule: str, lambda_grid,
                     D: int | None = None) -> np.ndarray:
    """Rows of (lambda, rho) over an ascending grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValueError("lambda_grid must be sorted ascending")
    rho = [stationary_state(stats, lam, rule, D).rho for lam in grid]
    return np.column_stack([grid, rho])
