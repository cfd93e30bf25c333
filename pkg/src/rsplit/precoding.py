"""MRT common precoder and the CI / ZF private precoders.

All builders accept a single ``K x N`` channel or a stack ``(..., K, N)``.
When ``beta`` is omitted they use the instantaneous normalization of the
given draw; the rate estimators pass long-term constants from
:func:`long_term_betas` instead.

Normalization conventions for the long-term constants:

``"power"`` (default)
    Exact long-term power: ``E||sqrt(P_c) w_c x_c + sum_k sqrt(P_p) w_k x_k||^2 = P``
    with expectations over fading, symbols and (for random drops) user
    location.
``"closed-form"``
    The Gamma/Wishart closed forms ``beta_p^2 = (N-K+1) / sum_k 1/w_k`` (ZF,
    ``= Gamma(2-K+N) / (K (N-K)!)`` for unit gains) and
    ``beta_p = 1 / sqrt(N sum_k u_k^2 w_k)`` (CI). These do not meet the power
    budget exactly (ZF is exact only for ``N-K = 1`` with unit gains; CI
    transmits ``K^3`` times too little private power) and are kept for
    comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemConfig, estimate_variances, pathloss_gains
from .errors import ConfigError, SingularChannelError

SCHEME_KINDS = ("CI", "ZF")
CONVENTIONS = ("power", "closed-form")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class CiWeights:
    """CI weight vector ``u`` with ``sum(u) = 1``."""

    u: tuple

    def __post_init__(self):
        u = tuple(float(x) for x in np.atleast_1d(self.u))
        if not u or abs(sum(u) - 1.0) > 1e-9:
            raise ConfigError(f"CI weights must sum to one, got {u}")
        object.__setattr__(self, "u", u)

    @classmethod
    def uniform(cls, K: int) -> "CiWeights":
        return cls((1.0 / K,) * K)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.u)


@dataclass
class PrecoderSet:
    """Common and private precoders for one channel draw.

    ``W_p`` columns are the private precoders ``w_k``. For CI they depend
    on the private symbol vector the set was built for.
    """

    w_c: np.ndarray
    W_p: np.ndarray
    beta_c: float
    beta_p: float
    kind: str
    symbol_dependent: bool

    def transmit(self, x_c, x_p, P_c: float, P_p: float) -> np.ndarray:
        """Superposed transmit vector ``sqrt(P_c) w_c x_c + sqrt(P_p) W_p x_p``."""
        return np.sqrt(P_c) * self.w_c * x_c + np.sqrt(P_p) * (self.W_p @ x_p)


def _gram_inverse(H: np.ndarray) -> np.ndarray:
    A = H @ np.conj(np.swapaxes(H, -1, -2))
    cond = np.linalg.cond(A)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise SingularChannelError(f"channel Gram matrix is near-singular (cond={np.max(cond):.3g})")
    return np.linalg.inv(A)


def _hermitian(H: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(H, -1, -2))


def mrt_common(H_used: np.ndarray, beta_c: Optional[float] = None):
    """MRT common precoder ``w_c = beta_c sum_i h_i^H``.

    Returns ``(w_c, beta_c)``. Without ``beta_c`` the draw is normalized to
    unit norm.
    """
    H_used = np.asarray(H_used)
    direction = np.conj(H_used).sum(axis=-2)
    if beta_c is None:
        norm = np.linalg.norm(direction, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise SingularChannelError("all-zero channel")
        beta = 1.0 / norm
        return beta * direction, beta[..., 0]
    return beta_c * direction, float(beta_c)


def zf_private(H_used: np.ndarray, beta_p: Optional[float] = None):
    """ZF private precoders ``W_p = beta_p H^H (H H^H)^{-1}``, so ``H W_p = beta_p I``.

    Returns ``(W_p, beta_p)``. Without ``beta_p`` the instantaneous constant
    ``sqrt(K / tr (H H^H)^{-1})`` gives ``||W_p x||^2 = K`` on average over
    unit-modulus symbols.
    """
    H_used = np.asarray(H_used)
    K = H_used.shape[-2]
    Ainv = _gram_inverse(H_used)
    pinv = _hermitian(H_used) @ Ainv
    if beta_p is None:
        tr = np.real(np.trace(Ainv, axis1=-2, axis2=-1))
        beta = np.sqrt(K / tr)
        return beta[..., None, None] * pinv, beta
    return beta_p * pinv, float(beta_p)


def ci_vinv_u(H_used: np.ndarray, x_p: np.ndarray, u) -> np.ndarray:
    """``V^{-1} u`` with ``V = diag(x^H) (H H^H)^{-1} diag(x)``.

    Computed as ``(1/x) * (H H^H ((1/conj x) * u))``, valid for any nonzero
    symbols; broadcasts over leading axes of ``H_used`` and ``x_p``.
    """
    H_used = np.asarray(H_used)
    x_p = np.asarray(x_p)
    u = np.asarray(u, dtype=float)
    A = H_used @ _hermitian(H_used)
    inner = u / np.conj(x_p)
    return np.einsum("...kj,...j->...k", A, inner) / x_p


def ci_private(H_used: np.ndarray, x_p: np.ndarray, u=None, beta_p: Optional[float] = None):
    """Closed-form CI private precoders for the private symbol vector ``x_p``.

    ``W_p = (beta_p/K) H^H (H H^H)^{-1} diag(V^{-1} u)``. For unit-modulus
    symbols ``W_p x_p = (beta_p/K) H^H (u * x_p)`` and user ``k`` receives
    ``(beta_p/K) [V^{-1}u]_k x_k`` without interference.

    Returns ``(W_p, beta_p)``. Without ``beta_p`` the instantaneous constant
    makes ``||W_p x_p||^2 = K``.
    """
    H_used = np.asarray(H_used)
    x_p = np.asarray(x_p)
    K = H_used.shape[-2]
    if u is None:
        u = np.full(K, 1.0 / K)
    u = u.as_array() if isinstance(u, CiWeights) else np.asarray(u, dtype=float)
    Ainv = _gram_inverse(H_used)
    q = ci_vinv_u(H_used, x_p, u)
    W = (_hermitian(H_used) @ Ainv) * q[..., None, :] / K
    if beta_p is None:
        ux = u * x_p
        A = H_used @ _hermitian(H_used)
        energy = np.real(np.einsum("...i,...ij,...j->...", np.conj(ux), A, ux))
        beta = np.sqrt(K**3 / energy)
        return beta[..., None, None] * W, beta
    return beta_p * W, float(beta_p)


# -- long-term constants ---------------------------------------------------------


def _location_average(config: SystemConfig, fn, order: int = 48) -> np.ndarray:
    """Per-user average of ``fn(gains)`` over the user-location density."""
    if not config.random_users:
        return np.asarray(fn(pathloss_gains(config.distances, config.m_pl)), dtype=float)
    from .analytic.quadrature import annulus_rule

    r, w = annulus_rule(config.R0, config.R, order)
    vals = np.asarray(fn(pathloss_gains(r, config.m_pl)), dtype=float)
    return np.full(config.K, float(np.dot(w, vals)))


def estimate_variance_stats(config: SystemConfig, order: int = 48):
    """``(E[sigma_hat^2_k], E[1/sigma_hat^2_k])`` per user.

    ``sigma_hat^2`` is the variance of the channel the transmitter knows: the
    large-scale gain under perfect CSIT, the estimate variance otherwise.
    Random user drops are averaged over the location density.
    """
    p_u = config.p_u if config.csit == "imperfect" else None

    def hat(w):
        return estimate_variances(w, p_u)[0]

    mean = _location_average(config, hat, order)
    mean_inv = _location_average(config, lambda w: 1.0 / hat(w), order)
    return mean, mean_inv


def long_term_betas(config: SystemConfig, kind: str, convention: str = "power", u=None):
    """Long-term normalization constants ``(beta_c, beta_p)``.

    ``beta_c = 1/sqrt(N sum_k E sigma_hat^2_k)`` in both conventions. See the
    module docstring for the private constants. ZF with ``N = K`` has no
    finite long-term power (``E tr (H H^H)^{-1}`` diverges); the closed-form
    constant is used there with a warning.
    """
    kind = kind.upper()
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"precoder kind must be one of {SCHEME_KINDS}, got {kind!r}")
    if convention not in CONVENTIONS:
        raise ConfigError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    N, K = config.N, config.K
    if u is None:
        u = config.ci_weights
    u = u.as_array() if isinstance(u, CiWeights) else np.asarray(u, dtype=float)
    mean, mean_inv = estimate_variance_stats(config)
    beta_c = 1.0 / np.sqrt(N * mean.sum())
    if kind == "ZF":
        if convention == "power" and N > K:
            beta_p = np.sqrt(K * (N - K) / mean_inv.sum())
        else:
            if convention == "power":
                warnings.warn(
                    "ZF with N == K has unbounded mean private power; using the closed-form constant",
                    RuntimeWarning,
                    stacklevel=2,
                )
            beta_p = np.sqrt((N - K + 1) / mean_inv.sum())
    else:
        if convention == "power":
            beta_p = np.sqrt(K**3 / (N * np.sum(u**2 * mean)))
        else:
            beta_p = 1.0 / np.sqrt(N * np.sum(u**2 * mean))
    return float(beta_c), float(beta_p)


def build_precoders(
    H_used: np.ndarray,
    kind: str,
    x_p: Optional[np.ndarray] = None,
    u=None,
    betas: Optional[tuple] = None,
) -> PrecoderSet:
    """Assemble a :class:`PrecoderSet` (CI needs the private symbols ``x_p``)."""
    kind = kind.upper()
    beta_c, beta_p = betas if betas is not None else (None, None)
    w_c, bc = mrt_common(H_used, beta_c)
    if kind == "ZF":
        W_p, bp = zf_private(H_used, beta_p)
    elif kind == "CI":
        if x_p is None:
            raise ConfigError("CI precoders need the private symbol vector")
        W_p, bp = ci_private(H_used, x_p, u, beta_p)
    else:
        raise ConfigError(f"unknown precoder kind {kind!r}")
    return PrecoderSet(w_c=w_c, W_p=W_p, beta_c=bc, beta_p=bp, kind=kind, symbol_dependent=kind == "CI")
