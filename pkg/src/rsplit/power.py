"""Search for the common/private power split ``t``.

All searches take the sum rate as a function of ``t``. The Monte-Carlo rate
functions built by :func:`sum_rate_function` reuse the same channel and noise
draws for every ``t`` (common random numbers), so comparisons between
candidate splits are paired and the searches see a deterministic function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import SystemConfig, derive_power_split
from .errors import ConfigError, NotSaturatedError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ESTIMATORS = ("mc", "analytic")


@dataclass(frozen=True)
class SplitSearchResult:
    """Outcome of a power-split search."""

    t_star: float
    rate_at_t: float
    iterations: int
    bracket_width: float
    method: str
    converged: bool = True
    note: str = ""


def sum_rate_function(scheme: str, config: SystemConfig, settings=None, estimator: str = "mc") -> Callable[[float], float]:
    """``t -> sum rate`` for a scheme at the config's SNR."""
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")

    def rate(t: float) -> float:
        split = derive_power_split(config.P, float(t), config.K)
        if estimator == "mc":
            from .rate_mc import rs_sum_rate_mc

            return rs_sum_rate_mc(scheme, config, split, settings).sum_rate
        from .analytic.rates import analytic_sum_rate

        return analytic_sum_rate(scheme, config, split)

    return rate


def per_user_private_function(scheme: str, config: SystemConfig, settings=None, estimator: str = "mc"):
    """``t -> list of private rates``; ``t = 1`` gives the No-RS rates."""

    def rates(t: float):
        split = derive_power_split(config.P, float(t), config.K)
        if estimator == "mc":
            from .rate_mc import rs_sum_rate_mc

            return rs_sum_rate_mc(scheme, config, split, settings).private_rates
        from .analytic.rates import analytic_rates

        return analytic_rates(scheme, config, split)[1]

    return rates


def golden_section_t(rate_fn: Callable[[float], float], tol: float = 1e-2, max_iter: int = 60) -> SplitSearchResult:
    """Maximize ``rate_fn`` on ``[0, 1]`` by golden-section search.

    Interior points ``t1 = zeta - lam (zeta - rho)`` and ``t2 = rho + lam (zeta - rho)``
    with ``lam = (sqrt 5 - 1)/2``; one of them is reused every iteration.
    Stops when the bracket is narrower than ``tol`` and returns its midpoint.
    """
    if not tol > 0:
        raise ConfigError("tol must be positive")
    rho, zeta = 0.0, 1.0
    t1 = zeta - GOLDEN * (zeta - rho)
    t2 = rho + GOLDEN * (zeta - rho)
    f1, f2 = rate_fn(t1), rate_fn(t2)
    it = 0
    while zeta - rho >= tol and it < max_iter:
        it += 1
        if f1 >= f2:
            zeta, t2, f2 = t2, t1, f1
            t1 = zeta - GOLDEN * (zeta - rho)
            f1 = rate_fn(t1)
        else:
            rho, t1, f1 = t1, t2, f2
            t2 = rho + GOLDEN * (zeta - rho)
            f2 = rate_fn(t2)
    t_star = 0.5 * (rho + zeta)
    width = zeta - rho
    return SplitSearchResult(
        t_star=t_star,
        rate_at_t=float(rate_fn(t_star)),
        iterations=it,
        bracket_width=width,
        method="golden",
        converged=width < tol,
    )


def grid_search_t(rate_fn: Callable[[float], float], grid_points: int = 101) -> SplitSearchResult:
    """Evaluate ``rate_fn`` on a uniform grid of ``[0, 1]``; ties go to the smallest ``t``."""
    if grid_points < 2:
        raise ConfigError("grid_points must be at least 2")
    grid = np.linspace(0.0, 1.0, int(grid_points))
    values = np.array([rate_fn(float(t)) for t in grid])
    best = int(np.argmax(values))
    return SplitSearchResult(
        t_star=float(grid[best]),
        rate_at_t=float(values[best]),
        iterations=int(grid_points),
        bracket_width=1.0 / (grid_points - 1),
        method="grid",
    )


def rate_matching_t(
    config: SystemConfig,
    scheme: str,
    settings=None,
    rate_tol: float = 0.02,
    estimator: str = "mc",
    t_tol: float = 1e-3,
    max_iter: int = 40,
) -> SplitSearchResult:
    """Smallest ``t`` whose private rates stay within ``rate_tol`` of the No-RS rates.

    Bisection on the worst-user gap ``min_k (R_k^p(t) - R_k^NoRS)``, which is
    non-decreasing in ``t``. If even ``t = 1`` misses the target the result
    is ``t = 1`` with ``converged=False``.
    """
    kind = scheme.upper().split("-")[-1]
    rs_scheme = f"RS-{kind}"
    private = per_user_private_function(rs_scheme, config, settings, estimator)
    nors = np.asarray(private(1.0))
    sum_fn = sum_rate_function(rs_scheme, config, settings, estimator)

    def gap(t):
        return float(np.min(np.asarray(private(t)) - nors))

    if gap(1.0) < -rate_tol:
        return SplitSearchResult(1.0, sum_fn(1.0), 0, 0.0, "rate-match", converged=False, note="no split matches No-RS")
    if gap(0.0) >= -rate_tol:
        return SplitSearchResult(0.0, sum_fn(0.0), 0, 0.0, "rate-match")
    lo, hi = 0.0, 1.0
    it = 0
    while hi - lo > t_tol and it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        if gap(mid) >= -rate_tol:
            hi = mid
        else:
            lo = mid
    return SplitSearchResult(t_star=hi, rate_at_t=sum_fn(hi), iterations=it, bracket_width=hi - lo, method="rate-match")


@dataclass(frozen=True)
class SaturationResult:
    P_min: float
    snr_db: float
    t_star: float
    rate: float

    def __iter__(self):
        return iter((self.P_min, self.t_star))


def min_power_saturation(
    config: SystemConfig,
    scheme: str,
    settings=None,
    rate_tol: float = 0.05,
    snr_grid_db: Optional[np.ndarray] = None,
    estimator: str = "mc",
    grid_points: int = 21,
) -> SaturationResult:
    """Smallest total power whose best split reaches ``(K+1) log2 M - rate_tol``.

    Binary search over a dB grid (sum rate is non-decreasing in SNR). The
    split at each probed power is chosen by :func:`grid_search_t`.
    Unpacks as ``(P_min, t_star)``.
    """
    if snr_grid_db is None:
        snr_grid_db = np.arange(-10.0, 61.0, 1.0)
    grid = np.asarray(snr_grid_db, dtype=float)
    target = (config.K + 1) * math.log2(config.M) - rate_tol
    cache = {}

    def best(i):
        if i not in cache:
            cfg = config.replace(P=10.0 ** (grid[i] / 10.0) * config.sigma2[0])
            cache[i] = grid_search_t(sum_rate_function(scheme, cfg, settings, estimator), grid_points)
        return cache[i]

    if best(len(grid) - 1).rate_at_t < target:
        raise NotSaturatedError(f"{scheme} does not reach {target:.3f} bits by {grid[-1]:g} dB")
    lo, hi = -1, len(grid) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if best(mid).rate_at_t >= target:
            hi = mid
        else:
            lo = mid
    res = best(hi)
    return SaturationResult(P_min=10.0 ** (grid[hi] / 10.0) * config.sigma2[0], snr_db=float(grid[hi]), t_star=res.t_star, rate=res.rate_at_t)


@dataclass(frozen=True)
class PerChannelSplit:
    """Split chosen separately for every channel state."""

    rate: float
    halfwidth: float
    t_per_channel: np.ndarray
    grid: np.ndarray


def per_channel_split(scheme: str, config: SystemConfig, settings=None, grid_points: int = 21) -> PerChannelSplit:
    """Average over channels of ``max_t`` of the per-channel RS sum rate.

    The maximization is moved inside the expectation: each Monte-Carlo
    channel state picks its own ``t`` from a uniform grid (first argmax on
    ties). Every grid point is one pass over the shared channel stream, so
    the cost is ``grid_points`` ergodic evaluations. The per-state sum uses
    the per-state minimum common rate, ``E[min_k R_k^c]``, which can be below
    the ergodic ``min_k E[R_k^c]``; the two modes are therefore not ordered.
    """
    from .rate_mc import McEstimatorSettings, _halfwidth, parse_scheme, per_channel_rates

    if grid_points < 2:
        raise ConfigError("grid_points must be at least 2")
    rs, kind = parse_scheme(scheme)
    if not rs:
        raise ConfigError("per-channel split search needs an RS scheme")
    settings = settings or McEstimatorSettings()
    grid = np.linspace(0.0, 1.0, int(grid_points))
    table = np.empty((settings.n_channel, grid.size))
    for j, t in enumerate(grid):
        common, private = per_channel_rates(kind, config, derive_power_split(config.P, float(t), config.K), settings)
        bits = math.log2(config.M)
        table[:, j] = np.clip(common, 0.0, bits).min(axis=1) + np.clip(private, 0.0, bits).sum(axis=1)
    best = np.argmax(table, axis=1)
    values = table[np.arange(table.shape[0]), best]
    return PerChannelSplit(
        rate=math.fsum(values.tolist()) / values.size,
        halfwidth=_halfwidth(values),
        t_per_channel=grid[best],
        grid=grid,
    )
