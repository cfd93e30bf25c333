"""Jensen-approximated ergodic rates for MRT/CI and MRT/ZF rate splitting.

Each rate has the structure of the Monte-Carlo stage differences in
:mod:`rsplit.rate_mc`, with the expectation moved inside the logarithm and
the Gaussian noise integrated out, ``E_n exp(-|a+n|^2/s2) -> exp(-|a|^2/(2 s2))``
(the constant factor ``1/2`` is dropped; it cancels in the common rate and
the dropped form is the usual approximation for the private rate). Only
user ``k``'s own private stream enters because both precoders are
interference-free under perfect CSIT.

Two forms are available:

``"consistent"`` (default)
    Exponents use the same power split and normalization constants as the
    Monte-Carlo estimators. The CI effective gain ``|[V^{-1}u]_k| / u_k`` is
    one Gamma-fitted law shared by the common and private terms, so the
    common rate vanishes at ``t = 1``; the ZF common gain uses the Gamma fit
    of ``Re(sum_i A_ki)``.
``"printed"``
    The reduced CI parameters ``xi = (beta_p/K) w_k u_k``,
    ``Psi = N |sqrt(1-t) dx_c + sqrt(t) dx_k / w_k|^2``, ``c = beta_p w_k u_k / K``
    with ``||A_k||^2 ~ Gamma(N(N+1), theta)`` and ``Y ~ Gamma(N-K+1, 1/K)``, and
    ZF private exponents ``t P beta_p^2 |dx|^2``. These are kept for comparison;
    their exponents do not scale like the physical received signal.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache

import numpy as np

from ..config import PowerSplit, SystemConfig, derive_power_split, estimate_variances, pathloss_gains
from ..constellation import stream_vectors
from ..errors import ConfigError
from ..precoding import long_term_betas
from .gamma_fit import gamma_fit_moments
from .quadrature import annulus_rule, quadrature_rule
from .special import gamma_gauss_mgf

logger = logging.getLogger(__name__)

FORMS = ("consistent", "printed")
PANEL_ORDER = 24
#: half-width of the panel around a Gaussian peak, in peak standard deviations
PEAK_SPAN = 10.0
LOCATION_ORDER = 24


@lru_cache(maxsize=None)
def _pairs(M: int, S: int) -> np.ndarray:
    """Differences ``x_m - x_i``, shape ``(M^S, M^S, S)``."""
    v = stream_vectors(M, S).vectors
    d = v[:, None, :] - v[None, :, :]
    d.setflags(write=False)
    return d


def _mean_log2_sum(log_terms: np.ndarray) -> float:
    """``mean_m log2 sum_i exp(log_terms[m, i])`` with max subtraction."""
    mx = log_terms.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(log_terms - mx).sum(axis=1))
    return float(lse.mean() / math.log(2.0))


def _clamp(value: float, bits: float, what: str) -> float:
    if value < -1e-12 or value > bits + 1e-12:
        logger.info("analytic %s rate %.4g outside [0, %g] before clamping", what, value, bits)
    return min(max(value, 0.0), bits)


def _check_form(form: str) -> None:
    if form not in FORMS:
        raise ConfigError(f"form must be one of {FORMS}, got {form!r}")


def _split(config: SystemConfig, split) -> PowerSplit:
    return derive_power_split(config.P, 1.0, config.K) if split is None else split


def _gains(config: SystemConfig) -> np.ndarray:
    if config.random_users:
        raise ConfigError("finite-N analytic rates need fixed user distances")
    return pathloss_gains(config.distances, config.m_pl)


def _mgf_table(q: np.ndarray, shape: float, scale: float) -> np.ndarray:
    """Elementwise ``E exp(-q Y^2)`` for ``Y ~ Gamma(shape, scale)``."""
    flat = q.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.array([gamma_gauss_mgf(float(v), shape, 1.0 / scale) for v in uniq])
    return vals[inv].reshape(q.shape)


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


# -- CI ----------------------------------------------------------------------------


def ci_gain_fit(config: SystemConfig, k: int):
    """Gamma fit of user ``k``'s CI effective gain ``|[V^{-1}u]_k| / u_k``."""
    return gamma_fit_moments("ci_gain", config, k)


def ci_psi_closed_form(k: int, c: float, config: SystemConfig, shape=None, scale=None) -> float:
    """Private-stream term ``mean_m log2 sum_i E_Y exp(-c^2 Y^2 |dx_k|^2 / (2 sigma_k^2))``.

    ``c`` is the amplitude coefficient of the gain ``Y``. The Gamma law of
    ``Y`` defaults to ``Gamma(N-K+1, scale 1/K)``; pass ``shape`` and
    ``scale`` for a fitted law. The inner expectation is the hypergeometric
    closed form (switching to quadrature where the two 1F1 terms cancel).
    """
    if shape is None or scale is None:
        shape, scale = float(config.N - config.K + 1), 1.0 / config.K
    d = np.abs(_pairs(config.M, 1)[:, :, 0]) ** 2
    q = c * c * d / (2.0 * config.sigma2[k])
    return _mean_log2_sum(_log(_mgf_table(q, shape, scale)))


def _ci_consistent(k: int, config: SystemConfig, split: PowerSplit, u):
    beta_c, beta_p = long_term_betas(config, "CI", "power", u=u)
    uk = (config.ci_weights if u is None else np.asarray(u, dtype=float))[k]
    fit = ci_gain_fit(config, k)
    s2 = config.sigma2[k]
    a_p = math.sqrt(split.P_p) * beta_p * uk / config.K
    a_c = math.sqrt(split.P_c) * beta_c
    d2 = _pairs(config.M, 2)
    q_full = np.abs(a_c * d2[..., 0] + a_p * d2[..., 1]) ** 2 / (2.0 * s2)
    phi = _mean_log2_sum(_log(_mgf_table(q_full, fit.shape, fit.scale)))
    psi = ci_psi_closed_form(k, a_p, config, fit.shape, fit.scale)
    return phi, psi


def _ci_printed(k: int, config: SystemConfig, split: PowerSplit, u):
    _, beta_p = long_term_betas(config, "CI", "closed-form", u=u)
    w = _gains(config)[k]
    uk = (config.ci_weights if u is None else np.asarray(u, dtype=float))[k]
    t, P, s2 = split.t, config.P, config.sigma2[k]
    fit = gamma_fit_moments("row_norm_A", config, k)
    xi = beta_p * w * uk / config.K
    d2 = _pairs(config.M, 2)
    Psi = config.N * np.abs(math.sqrt(1.0 - t) * d2[..., 0] + math.sqrt(t) * d2[..., 1] / w) ** 2
    phi = _mean_log2_sum(-fit.shape * np.log1p(P * xi * xi * fit.scale * Psi / (2.0 * s2)))
    c = math.sqrt(t * P) * beta_p * w * uk / config.K
    psi = ci_psi_closed_form(k, c, config)
    return phi, psi


def ci_common_rate_analytic(k: int, config: SystemConfig, split: PowerSplit, u=None, form: str = "consistent") -> float:
    """Approximate common rate ``log2 M - phi + psi`` of user ``k`` under MRT/CI."""
    _check_form(form)
    _gains(config)
    phi, psi = (_ci_consistent if form == "consistent" else _ci_printed)(k, config, split, u)
    return _clamp(math.log2(config.M) - phi + psi, math.log2(config.M), "CI common")


def ci_private_rate_analytic(k: int, config: SystemConfig, split=None, u=None, form: str = "consistent") -> float:
    """Approximate private rate ``log2 M - psi`` of user ``k`` under CI (``split=None``: no RS)."""
    _check_form(form)
    _gains(config)
    split = _split(config, split)
    _, psi = (_ci_consistent if form == "consistent" else _ci_printed)(k, config, split, u)
    return _clamp(math.log2(config.M) - psi, math.log2(config.M), "CI private")


# -- ZF ----------------------------------------------------------------------------


def _zf_psi(config: SystemConfig, k: int, amplitude: float) -> float:
    d = np.abs(_pairs(config.M, 1)[:, :, 0]) ** 2
    return _mean_log2_sum(-amplitude**2 * d / (2.0 * config.sigma2[k]))


def _zf_private_amplitude(config: SystemConfig, split: PowerSplit, form: str) -> float:
    if form == "consistent":
        _, beta_p = long_term_betas(config, "ZF", "power")
        return math.sqrt(split.P_p) * beta_p
    _, beta_p = long_term_betas(config, "ZF", "closed-form")
    return math.sqrt(split.t * config.P) * beta_p


def gamma_gaussian_log_expectation(c, e, s2: float, shape: float, scale: float, order: int = PANEL_ORDER):
    """``log E exp(-|c Y + e|^2 / (2 s2))`` for ``Y ~ Gamma(shape, scale)``, elementwise in ``c, e``.

    As the noise shrinks the integrand is a narrow Gaussian bump in ``y``
    centred where ``c y`` cancels ``e``, which a single Gauss-Laguerre rule
    misses. The integral is split at ``y0`` and ``y0 -/+ PEAK_SPAN`` peak
    widths and at fixed points on the Gamma scale, and each panel gets an
    ``order``-point Gauss-Legendre rule. The panel starting at zero uses a
    Gauss-Jacobi rule for the ``y^(shape-1)`` factor of the density.
    """
    c = np.asarray(c, dtype=complex).ravel()
    e = np.asarray(e, dtype=complex).ravel()
    c2 = np.abs(c) ** 2
    safe = np.where(c2 > 0, c2, 1.0)
    y0 = np.where(c2 > 0, -np.real(c * np.conj(e)) / safe, 0.0)
    width = np.where(c2 > 0, math.sqrt(s2) / np.sqrt(safe), 0.0)
    y_max = scale * (shape + 12.0 * math.sqrt(shape) + 60.0)
    spread = scale * (shape + math.sqrt(shape) * np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 7.0, 12.0]))
    fixed = np.concatenate([[0.0, y_max], np.clip(spread, 0.0, y_max)])
    peak = np.stack([y0 - PEAK_SPAN * width, y0, y0 + PEAK_SPAN * width], axis=1)
    edges = np.sort(np.concatenate([np.broadcast_to(fixed, (c.size, fixed.size)), np.clip(peak, 0.0, y_max)], axis=1), axis=1)
    rule = quadrature_rule("legendre", order)
    v = 0.5 * (rule.nodes + 1.0)
    log_wv = np.log(0.5 * rule.weights)
    log_norm = -math.lgamma(shape) - shape * math.log(scale)
    lin = np.real(c * np.conj(e))[:, None]
    e2 = (np.abs(e) ** 2)[:, None]

    def log_integrand(y):
        return -y / scale - (c2[:, None] * y * y + 2.0 * lin * y + e2) / (2.0 * s2)

    parts = []
    # first nonempty panel [0, b]: int_0^b y^(k-1) f(y) dy = b^k int_0^1 s^(k-1) f(b s) ds
    first = np.argmax(edges > 0, axis=1)
    b = edges[np.arange(c.size), first]
    jac = quadrature_rule("jacobi", order, shape - 1.0)
    y = b[:, None] * jac.nodes[None, :]
    parts.append(log_integrand(y) + np.log(jac.weights)[None, :] + (shape * np.log(b))[:, None])
    for j in range(1, edges.shape[1] - 1):
        a0 = np.maximum(edges[:, j], b)
        span = np.maximum(edges[:, j + 1], a0) - a0
        y = a0[:, None] + span[:, None] * v[None, :]
        with np.errstate(divide="ignore"):
            parts.append(log_integrand(y) + (shape - 1.0) * np.log(y) + log_wv[None, :] + np.log(span)[:, None])
    logs = np.concatenate(parts, axis=1)
    mx = logs.max(axis=1, keepdims=True)
    return mx[:, 0] + np.log(np.exp(logs - mx).sum(axis=1)) + log_norm


def zf_common_rate_analytic(
    k: int, config: SystemConfig, split: PowerSplit, form: str = "consistent", order: int = PANEL_ORDER
) -> float:
    """Approximate common rate of user ``k`` under MRT/ZF.

    The MRT gain ``Re(sum_i h_k h_i^H)`` is averaged over its Gamma fit with
    :func:`gamma_gaussian_log_expectation` (``order`` nodes per panel).
    """
    _check_form(form)
    _gains(config)
    fit = gamma_fit_moments("mrt_sum_Y", config, k)
    convention = "power" if form == "consistent" else "closed-form"
    beta_c, _ = long_term_betas(config, "ZF", convention)
    a_c = math.sqrt(split.P_c if form == "consistent" else (1.0 - split.t) * config.P) * beta_c
    a_p = _zf_private_amplitude(config, split, form)
    s2 = config.sigma2[k]
    d2 = _pairs(config.M, 2)
    log_inner = gamma_gaussian_log_expectation(a_c * d2[..., 0], a_p * d2[..., 1], s2, fit.shape, fit.scale, order)
    phi = _mean_log2_sum(log_inner.reshape(d2.shape[:2]))
    psi = _zf_psi(config, k, a_p)
    return _clamp(math.log2(config.M) - phi + psi, math.log2(config.M), "ZF common")


def zf_private_rate_analytic(k: int, config: SystemConfig, split=None, form: str = "consistent") -> float:
    """Private rate ``log2 M - psi`` of user ``k`` under ZF (exact up to the noise step)."""
    _check_form(form)
    split = _split(config, split)
    psi = _zf_psi(config, k, _zf_private_amplitude(config, split, form))
    return _clamp(math.log2(config.M) - psi, math.log2(config.M), "ZF private")


# -- assembly ------------------------------------------------------------------------


def analytic_rates(scheme: str, config: SystemConfig, split=None, form: str = "consistent"):
    """Per-user ``(common, private)`` analytic rates for a scheme label."""
    from ..rate_mc import parse_scheme

    rs, kind = parse_scheme(scheme)
    if config.csit != "perfect":
        raise ConfigError("finite-N analytic rates assume perfect CSIT; use largeN_rates_imperfect")
    if not rs or split is None:
        split = derive_power_split(config.P, 1.0, config.K)
    common, private = [], []
    for k in range(config.K):
        if kind == "CI":
            private.append(ci_private_rate_analytic(k, config, split, form=form))
            common.append(ci_common_rate_analytic(k, config, split, form=form) if rs else 0.0)
        else:
            private.append(zf_private_rate_analytic(k, config, split, form=form))
            common.append(zf_common_rate_analytic(k, config, split, form=form) if rs else 0.0)
    return common, private


def analytic_sum_rate(scheme: str, config: SystemConfig, split=None, form: str = "consistent") -> float:
    """``min_k common_k + sum_k private_k`` (RS) or ``sum_k private_k`` (No-RS)."""
    from ..rate_mc import parse_scheme

    rs, _ = parse_scheme(scheme)
    common, private = analytic_rates(scheme, config, split, form)
    return (min(common) if rs else 0.0) + math.fsum(private)


# -- large-N imperfect CSIT -----------------------------------------------------------


NOISE_MODES = ("hermite", "jensen")
HERMITE_ORDER = 24


@lru_cache(maxsize=None)
def _hermite_noise(order: int):
    """Unit-variance complex Gaussian nodes ``n`` and probability weights."""
    # weight exp(-x^2) is the N(0, 1/2) density up to 1/sqrt(pi): one component of CN(0, 1)
    x, w = np.polynomial.hermite.hermgauss(order)
    re, im = np.meshgrid(x, x, indexing="ij")
    return (re + 1j * im).ravel(), np.outer(w, w).ravel() / math.pi


def _stage_exact(a: np.ndarray, s2: float, order: int = HERMITE_ORDER) -> float:
    """``mean_m E_n log2 sum_i exp(-(|a_mi + n|^2 - |n|^2)/s2)`` for deterministic ``a``, ``n ~ CN(0, s2)``."""
    nodes, weights = _hermite_noise(order)
    n = nodes * math.sqrt(s2)
    E = -(np.abs(a[:, :, None]) ** 2 + 2.0 * np.real(a[:, :, None] * np.conj(n))) / s2
    mx = E.max(axis=1, keepdims=True)
    lse = mx[:, 0, :] + np.log(np.exp(E - mx).sum(axis=1))
    return float((lse @ weights).mean() / math.log(2.0))


def _deterministic_rates(M, s2, a_c, a_p, noise: str = "hermite"):
    """Common and private rates for deterministic gains ``a_c`` (common) and ``a_p`` (private)."""
    bits = math.log2(M)
    d2 = _pairs(M, 2)
    d1 = _pairs(M, 1)[:, :, 0]
    a_full = a_c * d2[..., 0] + a_p * d2[..., 1]
    a_priv = a_p * d1
    if noise == "hermite":
        phi = _stage_exact(a_full, s2)
        psi = _stage_exact(a_priv, s2)
    else:
        phi = _mean_log2_sum(-np.abs(a_full) ** 2 / (2.0 * s2))
        psi = _mean_log2_sum(-np.abs(a_priv) ** 2 / (2.0 * s2))
    return bits - phi + psi, bits - psi


def largeN_rates_imperfect(
    k: int,
    scheme: str,
    config: SystemConfig,
    split: PowerSplit,
    tau=None,
    p_p=None,
    quad_order: int = LOCATION_ORDER,
    noise: str = "hermite",
):
    """Large-``N`` deterministic-equivalent rates ``(common, private, no_rs)`` with estimated channels.

    With ``N >> K`` the inner products of the estimated channels concentrate:
    ``h_k w_c -> beta_c N sigma_hat_k^2`` and, for CI,
    ``(beta_p/K)[V^{-1}u]_k -> N beta_p u_k sigma_hat_k^2 / K``; ZF delivers
    ``beta_p``. Random user drops are averaged over the location density
    with a Gauss-Legendre rule of order ``quad_order`` on ``[R0, R]``.

    Because the equivalent gains are deterministic, the noise expectation is
    integrated exactly by a 2-D Gauss-Hermite rule (``noise="hermite"``);
    ``noise="jensen"`` applies the same noise step as the finite-N forms.
    """
    if noise not in NOISE_MODES:
        raise ConfigError(f"noise must be one of {NOISE_MODES}, got {noise!r}")
    from ..rate_mc import parse_scheme

    _, kind = parse_scheme(scheme)
    cfg = config.replace(
        csit="imperfect",
        tau=config.tau if tau is None else float(tau),
        pilot_power=config.pilot_power if p_p is None else float(p_p),
    )
    beta_c, beta_p = long_term_betas(cfg, kind, "power")
    nors = derive_power_split(cfg.P, 1.0, cfg.K)
    uk = cfg.ci_weights[k]
    N, K = cfg.N, cfg.K
    s2 = cfg.sigma2[k]

    def at_gain(w):
        sh = estimate_variances(np.atleast_1d(w), cfg.p_u)[0][0]
        g_c = beta_c * N * sh
        g_p = N * beta_p * uk * sh / K if kind == "CI" else beta_p
        common, private = _deterministic_rates(cfg.M, s2, math.sqrt(split.P_c) * g_c, math.sqrt(split.P_p) * g_p, noise)
        _, no_rs = _deterministic_rates(cfg.M, s2, 0.0, math.sqrt(nors.P_p) * g_p, noise)
        return np.array([common, private, no_rs])

    if cfg.random_users:
        r, wts = annulus_rule(cfg.R0, cfg.R, quad_order)
        vals = sum(wt * at_gain(float(g)) for wt, g in zip(wts, pathloss_gains(r, cfg.m_pl)))
    else:
        vals = at_gain(float(pathloss_gains(cfg.distances, cfg.m_pl)[k]))
    bits = math.log2(cfg.M)
    return tuple(_clamp(float(v), bits, "large-N") for v in vals)
