"""Rayleigh channels with path loss and the imperfect-CSIT decomposition H = Hhat + E."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemConfig, estimate_variances, pathloss_gains, sample_user_distance


@dataclass
class ChannelRealization:
    """One channel draw (or a stack of draws along leading axes).

    ``H`` is the true ``K x N`` channel, ``Hhat`` what the transmitter uses to
    build its precoders and ``E = H - Hhat``. ``D`` holds the large-scale gains
    as a vector (the diagonal of the path-loss matrix).
    """

    H: np.ndarray
    Hhat: np.ndarray
    E: np.ndarray
    D: np.ndarray
    sigma_hat2: np.ndarray
    sigma_e2: np.ndarray

    @property
    def perfect(self) -> bool:
        return not np.any(self.sigma_e2)


def crandn(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _gains(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    return np.diagonal(D, axis1=-2, axis2=-1).copy() if D.ndim >= 2 else D


def sample_channel(config: SystemConfig, D, rng, size=None) -> ChannelRealization:
    """Perfect-CSIT draw: row ``k`` of ``H`` is i.i.d. ``CN(0, w_k)``.

    ``D`` is either the diagonal path-loss matrix or its diagonal; ``size``
    prepends batch axes.
    """
    w = _gains(D)
    lead = () if size is None else tuple(np.atleast_1d(size))
    shape = lead + (config.K, config.N)
    H = crandn(rng, shape) * np.sqrt(w)[..., :, None]
    zeros = np.zeros_like(H)
    return ChannelRealization(H=H, Hhat=H, E=zeros, D=w, sigma_hat2=w.copy(), sigma_e2=np.zeros_like(w))


def estimate_channel(config: SystemConfig, D, tau: float, p_p: float, rng, size=None) -> ChannelRealization:
    """Imperfect-CSIT draw with independent estimate and error.

    With training energy ``p_u = tau * p_p`` the estimate has per-user
    variance ``p_u w^2 / (p_u w + 1)`` and the error ``w / (p_u w + 1)``; the
    true channel is their sum.
    """
    w = _gains(D)
    sigma_hat2, sigma_e2 = estimate_variances(w, tau * p_p)
    lead = () if size is None else tuple(np.atleast_1d(size))
    shape = lead + (config.K, config.N)
    Hhat = crandn(rng, shape) * np.sqrt(sigma_hat2)[..., :, None]
    E = crandn(rng, shape) * np.sqrt(sigma_e2)[..., :, None]
    return ChannelRealization(H=Hhat + E, Hhat=Hhat, E=E, D=w, sigma_hat2=sigma_hat2, sigma_e2=sigma_e2)


def draw_realization(config: SystemConfig, rng, distances: Optional[np.ndarray] = None) -> ChannelRealization:
    """Draw users (if the config drops them randomly) and then a channel.

    This is the single-trial generator used by the Monte-Carlo estimators; the
    order of RNG consumption is fixed: distances first, then fading.
    """
    if distances is None:
        if config.random_users:
            distances = sample_user_distance(config.R0, config.R, rng, size=config.K)
        else:
            distances = np.asarray(config.distances)
    w = pathloss_gains(distances, config.m_pl)
    if config.csit == "imperfect":
        return estimate_channel(config, w, config.tau, config.pilot_power, rng)
    return sample_channel(config, w, rng)


def lln_diagnostics(n: int, rng, trials: int = 2000, var_a: float = 1.0, var_b: float = 1.0) -> dict:
    """Empirical check of the large-dimension limits of inner products.

    Draws ``trials`` independent pairs of ``n``-vectors with i.i.d.
    ``CN(0, var_a)`` and ``CN(0, var_b)`` entries and reports mean and
    variance of ``a^H a / n``, ``b^H b / n``, ``a^H b / n`` and
    ``a^H b / sqrt(n)``.
    """
    a = crandn(rng, (trials, n), var_a)
    b = crandn(rng, (trials, n), var_b)
    aa = np.einsum("ti,ti->t", a.conj(), a).real / n
    bb = np.einsum("ti,ti->t", b.conj(), b).real / n
    ab = np.einsum("ti,ti->t", a.conj(), b)
    report = {}
    for name, values in (("aa_n", aa), ("bb_n", bb), ("ab_n", ab / n), ("ab_sqrt_n", ab / np.sqrt(n))):
        report[name] = {
            "mean": complex(values.mean()) if np.iscomplexobj(values) else float(values.mean()),
            "var": float(np.mean(np.abs(values - values.mean()) ** 2)),
        }
    report["n"] = n
    report["trials"] = trials
    return report
