"""System configuration, user geometry and the common/private power split."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

SUPPORTED_ORDERS = (2, 4, 8)
CSIT_MODES = ("perfect", "imperfect")


@dataclass(frozen=True)
class SystemConfig:
    """Single-cell MU-MISO downlink parameters.

    Parameters
    ----------
    N : int
        Number of BS antennas.
    K : int
        Number of single-antenna users, ``K <= N``.
    M : int
        PSK order (2, 4 or 8).
    m_pl : float
        Path-loss exponent.
    P : float
        Total transmit power (linear).
    sigma2 : tuple of float
        Per-user noise power. A scalar is broadcast to all users.
    R0, R : float
        Minimum user distance and cell radius in meters.
    distances : float, tuple of float or None
        Fixed user distances (a scalar is broadcast). ``None`` means users are dropped uniformly in
        the annulus ``[R0, R]`` on every Monte-Carlo trial.
    csit : {"perfect", "imperfect"}
        Whether precoders are built from the true channel or from an
        MMSE-style estimate.
    tau, pilot_power : float
        Training length and per-pilot power; only used with imperfect CSIT.
    u : tuple of float or None
        CI weight vector (must sum to one). ``None`` selects uniform weights.
    """

    N: int = 3
    K: int = 2
    M: int = 4
    m_pl: float = 2.7
    P: float = 1.0
    sigma2: tuple = 1.0
    R0: float = 1.0
    R: float = 40.0
    distances: Optional[tuple] = 1.0
    csit: str = "perfect"
    tau: float = 10.0
    pilot_power: float = 1.0
    u: Optional[tuple] = None

    def __post_init__(self):
        sigma2 = self.sigma2
        if np.isscalar(sigma2):
            sigma2 = (float(sigma2),) * self.K
        object.__setattr__(self, "sigma2", tuple(float(s) for s in sigma2))
        distances = self.distances
        if distances is not None:
            if np.isscalar(distances):
                distances = (float(distances),) * self.K
            object.__setattr__(self, "distances", tuple(float(d) for d in distances))
        if self.u is not None:
            object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        self.validate()

    def validate(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K}")
        if self.K > self.N:
            raise ConfigError(f"K={self.K} users need at least as many antennas, N={self.N}")
        if self.M not in SUPPORTED_ORDERS:
            raise ConfigError(f"PSK order M must be one of {SUPPORTED_ORDERS}, got {self.M}")
        if len(self.sigma2) != self.K or min(self.sigma2) <= 0:
            raise ConfigError("sigma2 needs K strictly positive entries")
        if not self.P > 0:
            raise ConfigError(f"total power P must be positive, got {self.P}")
        if self.csit not in CSIT_MODES:
            raise ConfigError(f"csit must be one of {CSIT_MODES}, got {self.csit!r}")
        if self.distances is None:
            if not 0 < self.R0 < self.R:
                raise ConfigError(f"need 0 < R0 < R for random user drops, got R0={self.R0}, R={self.R}")
        else:
            if len(self.distances) != self.K:
                raise ConfigError("distances needs one entry per user")
            if min(self.distances) <= 0:
                raise ConfigError("distances must be positive")
        if self.csit == "imperfect" and not (self.tau >= 1 and self.pilot_power > 0):
            raise ConfigError("imperfect CSIT needs tau >= 1 and pilot_power > 0")
        if self.u is not None:
            if len(self.u) != self.K or abs(sum(self.u) - 1.0) > 1e-9:
                raise ConfigError("CI weights u need K entries summing to one")

    # -- derived quantities ----------------------------------------------------

    @property
    def random_users(self) -> bool:
        return self.distances is None

    @property
    def ci_weights(self) -> np.ndarray:
        if self.u is None:
            return np.full(self.K, 1.0 / self.K)
        return np.asarray(self.u, dtype=float)

    @property
    def p_u(self) -> float:
        """Training energy ``tau * p_p``."""
        return self.tau * self.pilot_power

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.P / self.sigma2[0])

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        """Return a copy with unit noise on every user and ``P = 10^(snr/10)``."""
        return replace(self, P=10.0 ** (snr_db / 10.0), sigma2=1.0)

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class PowerSplit:
    """Power assigned to the common stream and to each private stream."""

    t: float
    P_c: float
    P_p: float
    K: int = 1

    @property
    def total(self) -> float:
        return self.P_c + self.K * self.P_p


def derive_power_split(P: float, t: float, K: int) -> PowerSplit:
    """Split total power ``P`` into ``P_c = (1-t) P`` and ``P_p = t P / K``.

    ``t = 1`` turns the common message off (no rate splitting).
    """
    if not 0.0 <= t <= 1.0 or math.isnan(t):
        raise ConfigError(f"power fraction t must lie in [0, 1], got {t}")
    if not P > 0:
        raise ConfigError(f"total power must be positive, got {P}")
    P_p = t * P / K
    P_c = P - K * P_p if t < 1.0 else 0.0
    return PowerSplit(t=float(t), P_c=float(P_c), P_p=float(P_p), K=int(K))


def sample_user_distance(R0: float, R: float, rng=None, size=None, u=None):
    """Draw user distances with density ``2 (r - R0) / (R - R0)^2`` on ``[R0, R]``.

    Inverse-CDF sampling ``r = R0 + (R - R0) sqrt(u)``. Pass ``u`` directly to
    evaluate the map at given uniforms instead of drawing them from ``rng``.
    """
    if not 0 < R0 < R:
        raise ConfigError(f"need 0 < R0 < R, got R0={R0}, R={R}")
    if u is None:
        if rng is None:
            raise ConfigError("either rng or u must be given")
        u = rng.random(size)
    return R0 + (R - R0) * np.sqrt(u)


def distance_cdf(r, R0: float, R: float):
    r = np.clip(np.asarray(r, dtype=float), R0, R)
    return ((r - R0) / (R - R0)) ** 2


def pathloss_gains(distances: Sequence[float], m_pl: float) -> np.ndarray:
    """Large-scale gains ``d^-m`` for each user."""
    d = np.asarray(distances, dtype=float)
    return d ** (-float(m_pl))


def pathloss_matrix(config: SystemConfig, distances: Optional[Sequence[float]] = None) -> np.ndarray:
    """Diagonal ``K x K`` path-loss matrix for fixed or explicitly given distances."""
    if distances is None:
        if config.distances is None:
            raise ConfigError("config has random user drops; pass sampled distances explicitly")
        distances = config.distances
    return np.diag(pathloss_gains(distances, config.m_pl))


def estimate_variances(gains, p_u: Optional[float]):
    """Split each large-scale gain into estimate and error variances.

    Returns ``(sigma_hat2, sigma_e2)`` with
    ``sigma_hat2 = p_u w^2 / (p_u w + 1)`` and ``sigma_e2 = w / (p_u w + 1)``.
    ``p_u=None`` means perfect training.
    """
    w = np.asarray(gains, dtype=float)
    if p_u is None:
        return w.copy(), np.zeros_like(w)
    denom = p_u * w + 1.0
    sigma_e2 = w / denom
    # w - sigma_e2 keeps the decomposition exact in floating point
    sigma_hat2 = w - sigma_e2
    return sigma_hat2, sigma_e2
