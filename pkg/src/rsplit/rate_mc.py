"""Monte-Carlo estimators of finite-alphabet ergodic rates.

Every rate is a difference of *stage values*

    T = E_{m, n} [ log2 sum_i exp(-(|a_{m,i} + n|^2 - |n|^2) / sigma^2) ],
    a_{m,i} = sum_{s in varying} g_{m,s} (x_{m,s} - x_{i,s}),

where the outer index ``m`` runs over the transmitted stream vectors, ``i``
over hypotheses on the *varying* streams (the others are known to the
receiver) and ``g`` are the effective scalar gains user ``k`` sees on each
stream. Subtracting ``|n|^2`` inside the exponent only shifts each stage by
the same constant, which cancels in every rate. With three stages per user

    T_full   varying = common + all private streams
    T_priv   varying = all private streams (common removed by SIC)
    T_others varying = private streams of the other users

the rates are ``common_k = log2 M - T_full + T_priv`` and
``private_k = log2 M - T_priv + T_others``. No-RS is the private rate with
all power on the private streams.

For CI the private precoder depends on the transmitted private vector, so
the gains of the outer index ``m`` are those of ``W_p(x_m)`` applied to the
hypothesis differences (the ``"conditioned"`` model). The ``"physical"``
model instead uses the actual superposition ``W_p(x) x = (beta_p/K) H^H (u * x)``,
which is linear in ``x`` and gives symbol-independent gains.

Streams whose gain is numerically zero contribute exactly ``log2 M`` each to
a stage and are removed before enumeration. Noise is sampled (no Jensen
step), so these estimators are the reference for the analytic module.

Reproducibility: channel ``j`` draws from ``SeedSequence(seed, spawn_key=(1, j))``
regardless of scheme, SNR or power split, so comparisons across those
axes are paired. Each (user, channel) pair has one noise stream, shared by
the user's three stages so that stage differences are paired too (at
``t = 1`` the common rate is then exactly zero). Channels are processed in fixed-size chunks and the per-channel
results are reduced in index order, so the worker count never changes the
output bits.
"""

from __future__ import annotations

import logging
import math
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channel import crandn, draw_realization
from .config import PowerSplit, SystemConfig, derive_power_split
from .constellation import psk_alphabet, stream_vectors
from .errors import ConfigError, ResourceCapError, SingularChannelError
from .precoding import COND_LIMIT, ci_vinv_u, long_term_betas

logger = logging.getLogger(__name__)

SCHEMES = ("RS-CI", "RS-ZF", "NoRS-CI", "NoRS-ZF")
CI_GAIN_MODELS = ("conditioned", "physical")
NORMALIZATIONS = ("long-term", "instantaneous")

_CHANNEL_TAG = 1
_NOISE_TAG = 2
_OUTER_TAG = 3
_STAGES = ("full", "priv", "others")

#: Largest inner (hypothesis) enumeration per stage.
INNER_CAP = 2 ** 16
PRUNE_TOL = 1e-9
_MAX_REDRAWS = 16


def parse_scheme(scheme: str):
    """Return ``(rate_splitting, kind)`` for a scheme label such as ``"RS-CI"``."""
    label = scheme.strip().upper().replace("_", "-")
    for name in SCHEMES:
        if label == name.upper():
            rs, kind = name.split("-")
            return rs == "RS", kind
    raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass(frozen=True)
class McEstimatorSettings:
    """Sample counts and engine options for the Monte-Carlo estimators.

    Parameters
    ----------
    n_channel, n_noise : int
        Channel draws and noise draws per channel.
    seed : int
        Master seed.
    chunk_size : int
        Channels per work item. Part of the reproducibility contract;
        independent of ``workers``.
    workers : int
        Process count for channel chunks (1 runs in-process).
    normalization : {"long-term", "instantaneous"}
    beta_convention : {"power", "closed-form"}
        Long-term constants, see :mod:`rsplit.precoding`.
    ci_gain_model : {"conditioned", "physical"}
    outer_cap : int
        Outer enumerations larger than this are subsampled uniformly.
    outer_samples : int
        Subsample size when ``outer_cap`` is exceeded.
    logsumexp_guard : bool
        Subtract the running maximum before exponentiating.
    block_elems : int
        Memory cap (complex elements) for one outer block.
    """

    n_channel: int = 500
    n_noise: int = 20
    seed: int = 0
    chunk_size: int = 25
    workers: int = 1
    normalization: str = "long-term"
    beta_convention: str = "power"
    ci_gain_model: str = "conditioned"
    outer_cap: int = 4096
    outer_samples: int = 512
    logsumexp_guard: bool = True
    block_elems: int = 2 ** 22

    def __post_init__(self):
        if self.n_channel < 1 or self.n_noise < 1:
            raise ConfigError("n_channel and n_noise must be at least 1")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("chunk_size and workers must be at least 1")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigError(f"normalization must be one of {NORMALIZATIONS}")
        if self.ci_gain_model not in CI_GAIN_MODELS:
            raise ConfigError(f"ci_gain_model must be one of {CI_GAIN_MODELS}")
        if self.outer_samples < 1:
            raise ConfigError("outer_samples must be at least 1")

    def replace(self, **changes) -> "McEstimatorSettings":
        return replace(self, **changes)


@dataclass
class RatePoint:
    """Per-user and sum rates at one operating point (bits/s/Hz)."""

    snr_db: float
    t: float
    common_rates: list
    private_rates: list
    sum_rate: float
    ci_halfwidth: float
    samples: int
    scheme: str
    csit: str
    n_noise: int = 0
    clamped: int = 0


@dataclass(frozen=True)
class McRate:
    """A single rate estimate with its 95% Monte-Carlo half-width."""

    rate: float
    halfwidth: float


# -- per-channel gains ---------------------------------------------------------


@dataclass
class ChannelGains:
    """Unit-power effective gains for one channel draw.

    ``gc[k]`` is user ``k``'s gain on the common stream. ``gp`` is
    ``(K, K)`` (symbol-independent) or ``(K, M^K, K)`` indexed by the
    transmitted private vector.
    """

    gc: np.ndarray
    gp: np.ndarray
    noise: Optional[dict] = None

    @property
    def conditioned(self) -> bool:
        return self.gp.ndim == 3


def _draw_channel(config: SystemConfig, seed: int, index: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_CHANNEL_TAG, index)))
    for _ in range(_MAX_REDRAWS):
        ch = draw_realization(config, rng)
        A = ch.Hhat @ ch.Hhat.conj().T
        if np.linalg.cond(A) <= COND_LIMIT:
            return ch
    raise SingularChannelError(f"channel {index}: {_MAX_REDRAWS} consecutive near-singular draws")


def channel_gains(ch, kind: str, config: SystemConfig, betas, settings: McEstimatorSettings) -> ChannelGains:
    """Effective gains of one realization for precoder ``kind``.

    ``betas`` is ``(beta_c, beta_p)`` or ``None`` for instantaneous
    normalization.
    """
    H, Hhat = ch.H, ch.Hhat
    K = config.K
    cross = H @ Hhat.conj().T
    A = Hhat @ Hhat.conj().T
    Ainv = np.linalg.inv(A)
    R = cross @ Ainv
    mrt = cross.sum(axis=1)
    if betas is None:
        beta_c = 1.0 / np.linalg.norm(Hhat.conj().sum(axis=0))
    else:
        beta_c = betas[0]
    gc = beta_c * mrt
    if kind == "ZF":
        beta_p = math.sqrt(K / np.real(np.trace(Ainv))) if betas is None else betas[1]
        return ChannelGains(gc=gc, gp=beta_p * R)
    u = config.ci_weights
    if settings.ci_gain_model == "physical":
        if betas is None:
            raise ConfigError("the physical CI gain model needs long-term normalization")
        return ChannelGains(gc=gc, gp=(betas[1] / K) * cross * u[None, :])
    xp = stream_vectors(config.M, K, cap=max(settings.outer_cap, config.M ** K)).vectors
    Q = ci_vinv_u(Hhat, xp, u)  # (M^K, K)
    if betas is None:
        ux = u * xp
        energy = np.real(np.einsum("mi,ij,mj->m", ux.conj(), A, ux))
        beta_p = np.sqrt(K**3 / energy)[:, None]
    else:
        beta_p = betas[1]
    gp = (beta_p * Q / K)[None, :, :] * R[:, None, :]
    return ChannelGains(gc=gc, gp=gp)


# -- stage evaluation -----------------------------------------------------------


def _logsumexp(E: np.ndarray, axis: int, guard: bool) -> np.ndarray:
    if not guard:
        return np.log(np.exp(E).sum(axis=axis))
    mx = E.max(axis=axis, keepdims=True)
    return np.squeeze(mx, axis=axis) + np.log(np.exp(E - mx).sum(axis=axis))


def stage_value(
    outer_x: np.ndarray,
    gains: np.ndarray,
    inner_x: np.ndarray,
    noise: np.ndarray,
    sigma2: float,
    guard: bool = True,
    block_elems: int = 2 ** 22,
) -> float:
    """``E_{m,n} log2 sum_i exp(-(|a_{m,i}+n|^2 - |n|^2)/sigma2)`` for one channel.

    Parameters
    ----------
    outer_x : (n_outer, S) complex
        Varying-stream part of each outer vector.
    gains : (S,) or (n_outer, S) complex
        Effective stream gains, shared or per outer vector.
    inner_x : (n_inner, S) complex
        Hypotheses over the varying streams.
    noise : (n_noise,) complex
    """
    n_outer = outer_x.shape[0]
    n_inner = inner_x.shape[0]
    per_row = n_inner * noise.size
    block = max(1, block_elems // max(per_row, 1))
    nre = noise.real[None, None, :]
    nim = noise.imag[None, None, :]
    total = 0.0
    shared = gains.ndim == 1
    if shared:
        c_all = inner_x @ gains
        b_all = outer_x @ gains
    for start in range(0, n_outer, block):
        stop = min(n_outer, start + block)
        if shared:
            a = b_all[start:stop, None] - c_all[None, :]
        else:
            g = gains[start:stop]
            b = np.einsum("ms,ms->m", g, outer_x[start:stop])
            a = b[:, None] - g @ inner_x.T
        ar = a.real[:, :, None]
        ai = a.imag[:, :, None]
        E = -(ar * ar + ai * ai + 2.0 * (ar * nre + ai * nim)) / sigma2
        total += float(_logsumexp(E, axis=1, guard=guard).sum())
    return total / (n_outer * noise.size * math.log(2.0))


def _stage(
    outer_x: np.ndarray,
    gains: np.ndarray,
    M: int,
    noise: np.ndarray,
    sigma2: float,
    settings: McEstimatorSettings,
    outer_rng_key: tuple,
    scale: Optional[float] = None,
) -> float:
    """Stage value with zero-gain pruning and outer subsampling.

    Streams with gain below ``PRUNE_TOL * scale`` are pruned; ``scale``
    defaults to the largest gain of the stage and should be the user's
    overall gain scale when the stage holds only interference terms.
    """
    bits = math.log2(M)
    S = outer_x.shape[1]
    if S == 0:
        return 0.0
    mags = np.abs(gains).reshape(-1, S).max(axis=0)
    top = mags.max() if scale is None else scale
    keep = mags > PRUNE_TOL * top if top > 0 else np.zeros(S, dtype=bool)
    pruned = int(S - keep.sum())
    if not keep.any():
        return pruned * bits
    outer_x = outer_x[:, keep]
    gains = gains[..., keep]
    S_kept = int(keep.sum())
    if M ** S_kept > INNER_CAP:
        raise ResourceCapError(f"inner enumeration {M}^{S_kept} exceeds cap {INNER_CAP}")
    inner_x = stream_vectors(M, S_kept, cap=INNER_CAP).vectors
    if gains.ndim == 1:
        # outer vectors are uniform over the alphabet, so their varying parts are the inner set
        outer_x = inner_x
    if outer_x.shape[0] > settings.outer_cap:
        rng = np.random.default_rng(np.random.SeedSequence(settings.seed, spawn_key=(_OUTER_TAG,) + outer_rng_key))
        pick = np.sort(rng.choice(outer_x.shape[0], size=settings.outer_samples, replace=False))
        outer_x = outer_x[pick]
        if gains.ndim == 2:
            gains = gains[pick]
    value = stage_value(outer_x, gains, inner_x, noise, sigma2, settings.logsumexp_guard, settings.block_elems)
    return value + pruned * bits


def _unit_noise(seed: int, k: int, index: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_NOISE_TAG, k, index)))
    return crandn(rng, n)


def _noise_set(settings: McEstimatorSettings, K: int, index: int) -> dict:
    shared = np.stack([_unit_noise(settings.seed, k, index, settings.n_noise) for k in range(K)])
    return {stage: shared for stage in _STAGES}


def channel_rates(
    gains: ChannelGains,
    config: SystemConfig,
    split: PowerSplit,
    settings: McEstimatorSettings,
    index: int,
    private_only: bool = False,
):
    """Per-user ``(common, private)`` rates for one channel draw (unclamped)."""
    K, M = config.K, config.M
    bits = math.log2(M)
    sqc, sqp = math.sqrt(split.P_c), math.sqrt(split.P_p)
    xp = stream_vectors(M, K, cap=max(settings.outer_cap, M ** K)).vectors
    others_mask = ~np.eye(K, dtype=bool)
    common = np.zeros(K)
    private = np.zeros(K)
    for k in range(K):
        s2 = config.sigma2[k]
        gp_k = gains.gp[k] * sqp  # (K,) or (M^K, K)
        noise = gains.noise if gains.noise is not None else _noise_set(settings, config.K, index)
        n_priv = noise["priv"][k] * math.sqrt(s2)
        n_oth = noise["others"][k] * math.sqrt(s2)
        scale = max(float(np.abs(gp_k).max()), abs(gains.gc[k]) * sqc)
        t_priv = _stage(xp, gp_k, M, n_priv, s2, settings, (1, k, index), scale)
        t_oth = _stage(xp[:, others_mask[k]], gp_k[..., others_mask[k]], M, n_oth, s2, settings, (2, k, index), scale)
        private[k] = bits - t_priv + t_oth
        if private_only:
            continue
        n_full = noise["full"][k] * math.sqrt(s2)
        gc_k = gains.gc[k] * sqc
        if gp_k.ndim == 1:
            g_full = np.concatenate(([gc_k], gp_k))
            x_full = np.zeros((1, K + 1))  # replaced by the inner set in _stage
        else:
            xc = psk_alphabet(M).symbols
            x_full = np.concatenate(
                (np.repeat(xc, xp.shape[0])[:, None], np.tile(xp, (M, 1))), axis=1
            )
            g_full = np.concatenate((np.full((x_full.shape[0], 1), gc_k), np.tile(gp_k, (M, 1))), axis=1)
        t_full = _stage(x_full, g_full, M, n_full, s2, settings, (0, k, index), scale)
        common[k] = bits - t_full + t_priv
    return common, private


# -- channel gain cache -----------------------------------------------------------

_GAIN_CACHE: "OrderedDict[tuple, list]" = OrderedDict()
_GAIN_CACHE_SIZE = 64


def _gain_key(kind: str, config: SystemConfig, settings: McEstimatorSettings, chunk: int) -> tuple:
    geometry = config.replace(P=1.0, sigma2=1.0)
    return (
        kind,
        geometry,
        settings.seed,
        settings.chunk_size,
        settings.n_channel,
        settings.normalization,
        settings.beta_convention,
        settings.ci_gain_model,
        settings.n_noise,
        settings.outer_cap,
        chunk,
    )


def clear_gain_cache() -> None:
    _GAIN_CACHE.clear()


def _betas(kind: str, config: SystemConfig, settings: McEstimatorSettings):
    if settings.normalization == "instantaneous":
        return None
    return long_term_betas(config, kind, settings.beta_convention)


def _chunk_gains(kind: str, config: SystemConfig, settings: McEstimatorSettings, chunk: int):
    key = _gain_key(kind, config, settings, chunk)
    hit = _GAIN_CACHE.get(key)
    if hit is not None:
        _GAIN_CACHE.move_to_end(key)
        return hit
    betas = _betas(kind, config, settings)
    start = chunk * settings.chunk_size
    stop = min(settings.n_channel, start + settings.chunk_size)
    out = []
    for j in range(start, stop):
        g = channel_gains(_draw_channel(config, settings.seed, j), kind, config, betas, settings)
        g.noise = _noise_set(settings, config.K, j)
        out.append(g)
    _GAIN_CACHE[key] = out
    while len(_GAIN_CACHE) > _GAIN_CACHE_SIZE:
        _GAIN_CACHE.popitem(last=False)
    return out


def _chunk_rates(args):
    kind, config, split, settings, chunk, private_only = args
    gains = _chunk_gains(kind, config, settings, chunk)
    start = chunk * settings.chunk_size
    common = np.zeros((len(gains), config.K))
    private = np.zeros((len(gains), config.K))
    for j, g in enumerate(gains):
        common[j], private[j] = channel_rates(g, config, split, settings, start + j, private_only)
    return common, private


def per_channel_rates(
    kind: str,
    config: SystemConfig,
    split: PowerSplit,
    settings: McEstimatorSettings,
    private_only: bool = False,
):
    """``(common, private)`` arrays of shape ``(n_channel, K)``, in channel order."""
    n_chunks = -(-settings.n_channel // settings.chunk_size)
    jobs = [(kind, config, split, settings, c, private_only) for c in range(n_chunks)]
    workers = min(settings.workers, n_chunks)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_rates, jobs))
    else:
        parts = [_chunk_rates(job) for job in jobs]
    common = np.concatenate([p[0] for p in parts], axis=0)
    private = np.concatenate([p[1] for p in parts], axis=0)
    return common, private


# -- public estimators --------------------------------------------------------------


def _settings_from(settings: Optional[McEstimatorSettings], rng) -> McEstimatorSettings:
    settings = settings or McEstimatorSettings()
    if rng is None:
        return settings
    if isinstance(rng, (int, np.integer)):
        return settings.replace(seed=int(rng))
    if isinstance(rng, np.random.Generator):
        return settings.replace(seed=int(rng.integers(2**63 - 1)))
    raise ConfigError("rng must be None, an int seed or a numpy Generator")


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / values.size


def _halfwidth(values: np.ndarray) -> float:
    if values.size < 2:
        return float("nan")
    mean = _mean(values)
    var = math.fsum(((values - mean) ** 2).tolist()) / (values.size - 1)
    return 1.96 * math.sqrt(var / values.size)


def _clamp(value: float, bits: float, what: str) -> tuple:
    if value < 0.0 or value > bits:
        logger.info("%s rate %.4g outside [0, %g] before clamping", what, value, bits)
        return min(max(value, 0.0), bits), 1
    return value, 0


def _resolve(scheme: str, config: SystemConfig, split: Optional[PowerSplit]):
    rs, kind = parse_scheme(scheme)
    if not rs or split is None:
        split = derive_power_split(config.P, 1.0, config.K)
    return rs, kind, split


def common_rate_mc(k: int, scheme: str, config: SystemConfig, split: PowerSplit, settings=None, rng=None) -> McRate:
    """Ergodic common-message rate of user ``k`` with its 95% half-width."""
    settings = _settings_from(settings, rng)
    _, kind, split = _resolve(scheme, config, split)
    common, _ = per_channel_rates(kind, config, split, settings)
    value, _ = _clamp(_mean(common[:, k]), math.log2(config.M), "common")
    return McRate(value, _halfwidth(common[:, k]))


def private_rate_mc(k: int, scheme: str, config: SystemConfig, split: PowerSplit, settings=None, rng=None) -> McRate:
    """Ergodic private-message rate of user ``k`` after SIC of the common stream."""
    settings = _settings_from(settings, rng)
    _, kind, split = _resolve(scheme, config, split)
    _, private = per_channel_rates(kind, config, split, settings, private_only=True)
    value, _ = _clamp(_mean(private[:, k]), math.log2(config.M), "private")
    return McRate(value, _halfwidth(private[:, k]))


def nors_rate_mc(k: int, kind: str, config: SystemConfig, settings=None, rng=None) -> McRate:
    """Per-user rate without rate splitting (all power on the private streams)."""
    kind = kind.upper().split("-")[-1]
    return private_rate_mc(k, f"NoRS-{kind}", config, None, settings, rng)


def rs_sum_rate_mc(scheme: str, config: SystemConfig, split: Optional[PowerSplit] = None, settings=None, rng=None) -> RatePoint:
    """Sum rate ``min_k common_k + sum_k private_k`` (or the No-RS sum).

    The half-width covers the per-channel sum ``common_{k*} + sum_k private_k``
    with ``k*`` the user attaining the minimum.
    """
    settings = _settings_from(settings, rng)
    rs, kind, split = _resolve(scheme, config, split)
    bits = math.log2(config.M)
    common, private = per_channel_rates(kind, config, split, settings, private_only=not rs)
    clamped = 0
    priv_rates = []
    for k in range(config.K):
        v, c = _clamp(_mean(private[:, k]), bits, "private")
        priv_rates.append(v)
        clamped += c
    if rs:
        comm_rates = []
        for k in range(config.K):
            v, c = _clamp(_mean(common[:, k]), bits, "common")
            comm_rates.append(v)
            clamped += c
        k_star = int(np.argmin(comm_rates))
        sum_rate = comm_rates[k_star] + math.fsum(priv_rates)
        series = common[:, k_star] + private.sum(axis=1)
    else:
        comm_rates = [0.0] * config.K
        sum_rate = math.fsum(priv_rates)
        series = private.sum(axis=1)
    label = ("RS-" if rs else "NoRS-") + kind
    return RatePoint(
        snr_db=config.snr_db,
        t=split.t,
        common_rates=comm_rates,
        private_rates=priv_rates,
        sum_rate=float(sum_rate),
        ci_halfwidth=_halfwidth(series),
        samples=settings.n_channel,
        scheme=label,
        csit=config.csit,
        n_noise=settings.n_noise,
        clamped=clamped,
    )
