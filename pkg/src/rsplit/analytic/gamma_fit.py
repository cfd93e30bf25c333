"""Gamma fits of channel statistics from a fixed calibration Monte Carlo.

Statistics (``A = H H^H``, user ``k``):

``row_norm_A``
    ``||A_k||^2``. The shape is fixed to ``N (N + 1)``; only the scale is
    matched to the calibration mean.
``mrt_sum_Y``
    ``Re(sum_i A_ki)``, the real part of the MRT common-stream gain. Shape
    and scale by two-moment matching.
``ci_gain``
    ``|sum_j u_j A_kj x_j / x_k| / u_k`` with uniformly random PSK symbols,
    the magnitude of the CI private gain divided by its coefficient
    ``beta_p u_k / K``. Two-moment matching.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..channel import crandn
from ..config import SystemConfig, estimate_variances, pathloss_gains, sample_user_distance
from ..constellation import psk_alphabet
from ..errors import ConfigError

STATISTICS = ("row_norm_A", "mrt_sum_Y", "ci_gain")
CALIBRATION_DRAWS = 100_000
CALIBRATION_SEED = 20_240_917


@dataclass(frozen=True)
class GammaFit:
    """Gamma distribution with shape ``shape`` and scale ``scale``."""

    shape: float
    scale: float
    sample_mean: float = float("nan")
    sample_var: float = float("nan")

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ConfigError(f"invalid Gamma fit shape={self.shape}, scale={self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale**2


def _calibration_samples(statistic, N, K, M, gains, random_users, R0, R, m_pl, u, k, n_draws, seed):
    rng = np.random.default_rng(seed)
    batch = 10_000
    out = []
    for start in range(0, n_draws, batch):
        n = min(batch, n_draws - start)
        if random_users:
            w = pathloss_gains(sample_user_distance(R0, R, rng, size=(n, K)), m_pl)
        else:
            w = np.broadcast_to(np.asarray(gains), (n, K))
        H = crandn(rng, (n, K, N)) * np.sqrt(w)[:, :, None]
        row = np.einsum("bn,bjn->bj", H[:, k, :], H.conj())  # A_kj
        if statistic == "row_norm_A":
            out.append(np.sum(np.abs(row) ** 2, axis=1))
        elif statistic == "mrt_sum_Y":
            out.append(np.real(row.sum(axis=1)))
        else:
            x = psk_alphabet(M).symbols[rng.integers(0, M, size=(n, K))]
            uu = np.asarray(u)
            out.append(np.abs(np.sum(uu * row * x, axis=1) / x[:, k]) / uu[k])
    return np.concatenate(out)


@lru_cache(maxsize=256)
def _fit_cached(statistic, N, K, M, gains, random_users, R0, R, m_pl, u, k, n_draws, seed):
    z = _calibration_samples(statistic, N, K, M, gains, random_users, R0, R, m_pl, u, k, n_draws, seed)
    mean = float(np.mean(z))
    var = float(np.var(z))
    if statistic == "row_norm_A":
        shape = float(N * (N + 1))
        return GammaFit(shape=shape, scale=mean / shape, sample_mean=mean, sample_var=var)
    if not (mean > 0 and var > 0):
        raise ConfigError(f"calibration of {statistic} gave non-positive moments")
    return GammaFit(shape=mean * mean / var, scale=var / mean, sample_mean=mean, sample_var=var)


def calibration_gains(config: SystemConfig) -> np.ndarray:
    """Large-scale gains of the channel the transmitter knows (estimate variance if imperfect)."""
    w = pathloss_gains(config.distances, config.m_pl) if not config.random_users else np.ones(config.K)
    if config.csit == "imperfect":
        w = estimate_variances(w, config.p_u)[0]
    return w


def gamma_fit_moments(
    statistic: str,
    config: SystemConfig,
    k: int,
    n_draws: int = CALIBRATION_DRAWS,
    seed: int = CALIBRATION_SEED,
) -> GammaFit:
    """Gamma fit of ``statistic`` for user ``k`` (see module docstring).

    Results are memoized per (statistic, N, K, M, gains, u, k) so repeated
    rate evaluations reuse one calibration run.
    """
    if statistic not in STATISTICS:
        raise ConfigError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    if not 0 <= k < config.K:
        raise ConfigError(f"user index {k} out of range")
    if config.random_users and config.csit == "imperfect":
        raise ConfigError("calibration with random drops supports perfect CSIT only")
    gains = tuple(float(g) for g in calibration_gains(config))
    return _fit_cached(
        statistic,
        config.N,
        config.K,
        config.M,
        gains,
        config.random_users,
        float(config.R0),
        float(config.R),
        float(config.m_pl),
        tuple(float(x) for x in config.ci_weights),
        int(k),
        int(n_draws),
        int(seed),
    )
