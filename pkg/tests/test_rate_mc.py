import math
import warnings

import numpy as np
import pytest

from rsplit import ConfigError, ResourceCapError, SystemConfig, derive_power_split
from rsplit.constellation import stream_vectors
from rsplit.rate_mc import (
    McEstimatorSettings,
    _draw_channel,
    channel_gains,
    common_rate_mc,
    nors_rate_mc,
    parse_scheme,
    private_rate_mc,
    rs_sum_rate_mc,
    stage_value,
)

FAST = McEstimatorSettings(n_channel=50, n_noise=8)
CFG = SystemConfig(N=3, K=2, M=4)


@pytest.mark.parametrize(
    "label, parsed",
    [("RS-CI", (True, "CI")), ("nors-zf", (False, "ZF")), ("rs-zf", (True, "ZF"))],
)
def test_parse_scheme(label, parsed):
    assert parse_scheme(label) == parsed


def test_parse_scheme_rejects_unknown():
    with pytest.raises(ConfigError):
        parse_scheme("RS-MMSE")


def _brute_stage(outer, g, inner, noise, s2):
    total = 0.0
    for xm in outer:
        for n in noise:
            acc = 0.0
            for xi in inner:
                a = np.dot(g, xm - xi)
                acc += math.exp(-(abs(a + n) ** 2 - abs(n) ** 2) / s2)
            total += math.log2(acc)
    return total / (len(outer) * len(noise))


def test_stage_value_matches_brute_force(rng):
    inner = stream_vectors(4, 2).vectors
    g = np.array([0.7 + 0.2j, -0.3 + 0.9j])
    noise = (rng.standard_normal(5) + 1j * rng.standard_normal(5)) * 0.5
    got = stage_value(inner, g, inner, noise, 0.5)
    assert got == pytest.approx(_brute_stage(inner, g, inner, noise, 0.5), rel=1e-12)


def test_stage_value_per_outer_gains(rng):
    inner = stream_vectors(2, 2).vectors
    gains = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    noise = rng.standard_normal(3) + 0j
    got = stage_value(inner, gains, inner, noise, 1.0)
    ref = np.mean([_brute_stage(inner[m : m + 1], gains[m], inner, noise, 1.0) for m in range(4)])
    assert got == pytest.approx(ref, rel=1e-12)


def test_stage_value_guard_and_blocks_do_not_change_result(rng):
    inner = stream_vectors(4, 2).vectors
    g = np.array([1.2, 0.4j])
    noise = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    ref = stage_value(inner, g, inner, noise, 0.3)
    assert stage_value(inner, g, inner, noise, 0.3, guard=False) == pytest.approx(ref, rel=1e-12)
    assert stage_value(inner, g, inner, noise, 0.3, block_elems=17) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("scheme", ["RS-CI", "RS-ZF"])
def test_full_private_power_recovers_no_rs(scheme):
    cfg = CFG.with_snr_db(8.0)
    rs = rs_sum_rate_mc(scheme, cfg, derive_power_split(cfg.P, 1.0, 2), FAST)
    nors = rs_sum_rate_mc("NoRS-" + scheme[3:], cfg, None, FAST)
    assert rs.common_rates == pytest.approx([0.0, 0.0], abs=1e-12)
    assert rs.sum_rate == pytest.approx(nors.sum_rate, abs=1e-12)


@pytest.mark.parametrize("scheme", ["RS-CI", "RS-ZF", "NoRS-CI", "NoRS-ZF"])
def test_rates_live_in_the_alphabet_range(scheme):
    cfg = CFG.with_snr_db(5.0)
    p = rs_sum_rate_mc(scheme, cfg, derive_power_split(cfg.P, 0.4, 2), FAST)
    bits = math.log2(cfg.M)
    assert all(0.0 <= r <= bits for r in p.private_rates + p.common_rates)
    assert 0.0 <= p.sum_rate <= (cfg.K + 1) * bits
    assert p.samples == FAST.n_channel and p.n_noise == FAST.n_noise


def test_low_snr_rates_vanish():
    cfg = CFG.with_snr_db(-30.0)
    assert rs_sum_rate_mc("RS-ZF", cfg, derive_power_split(cfg.P, 0.5, 2), FAST).sum_rate < 0.02


def test_same_seed_is_bit_identical_and_workers_do_not_matter():
    cfg = CFG.with_snr_db(6.0)
    split = derive_power_split(cfg.P, 0.3, 2)
    a = rs_sum_rate_mc("RS-CI", cfg, split, FAST)
    b = rs_sum_rate_mc("RS-CI", cfg, split, FAST.replace(workers=2, seed=0))
    assert a.sum_rate == b.sum_rate
    assert a.ci_halfwidth == b.ci_halfwidth
    c = rs_sum_rate_mc("RS-CI", cfg, split, FAST.replace(seed=1))
    assert c.sum_rate != a.sum_rate


def test_channel_stream_is_shared_across_schemes_and_powers():
    a = _draw_channel(CFG.with_snr_db(0.0), 5, 17)
    b = _draw_channel(CFG.with_snr_db(30.0), 5, 17)
    np.testing.assert_array_equal(a.H, b.H)


def test_rng_argument_forms():
    cfg = CFG.with_snr_db(5.0)
    split = derive_power_split(cfg.P, 0.5, 2)
    by_int = rs_sum_rate_mc("RS-ZF", cfg, split, FAST, rng=3)
    by_settings = rs_sum_rate_mc("RS-ZF", cfg, split, FAST.replace(seed=3))
    assert by_int.sum_rate == by_settings.sum_rate
    gen = rs_sum_rate_mc("RS-ZF", cfg, split, FAST, rng=np.random.default_rng(1))
    assert math.isfinite(gen.sum_rate)
    with pytest.raises(ConfigError):
        rs_sum_rate_mc("RS-ZF", cfg, split, FAST, rng="seed")


def test_per_user_estimators_agree_with_sum():
    cfg = CFG.with_snr_db(10.0)
    split = derive_power_split(cfg.P, 0.5, 2)
    point = rs_sum_rate_mc("RS-ZF", cfg, split, FAST)
    commons = [common_rate_mc(k, "RS-ZF", cfg, split, FAST).rate for k in range(2)]
    privates = [private_rate_mc(k, "RS-ZF", cfg, split, FAST).rate for k in range(2)]
    assert commons == pytest.approx(point.common_rates, abs=1e-12)
    assert privates == pytest.approx(point.private_rates, abs=1e-12)
    assert point.sum_rate == pytest.approx(min(commons) + sum(privates), abs=1e-12)
    nors = rs_sum_rate_mc("NoRS-ZF", cfg, None, FAST)
    assert nors_rate_mc(0, "ZF", cfg, FAST).rate == pytest.approx(nors.private_rates[0], abs=1e-12)


def test_zf_perfect_csit_has_symbol_independent_diagonal_gains():
    cfg = CFG
    ch = _draw_channel(cfg, 0, 0)
    g = channel_gains(ch, "ZF", cfg, (0.4, 1.0), FAST)
    np.testing.assert_allclose(g.gp, np.eye(2), atol=1e-12)
    assert not g.conditioned


def test_ci_conditioned_gains_are_indexed_by_symbol_vector():
    ch = _draw_channel(CFG, 0, 0)
    g = channel_gains(ch, "CI", CFG, (0.4, 2.0), FAST)
    assert g.gp.shape == (2, 16, 2)
    # perfect CSIT: user k sees only its own stream
    assert np.max(np.abs(g.gp[0, :, 1])) < 1e-12


@pytest.mark.parametrize(
    "changes",
    [dict(normalization="instantaneous"), dict(ci_gain_model="physical"), dict(beta_convention="closed-form")],
)
def test_engine_options_run(changes):
    cfg = CFG.with_snr_db(10.0)
    p = rs_sum_rate_mc("RS-CI", cfg, derive_power_split(cfg.P, 0.5, 2), FAST.replace(**changes))
    assert 0.0 < p.sum_rate <= 6.0


def test_imperfect_csit_and_random_drops_run():
    cfg = SystemConfig(N=3, K=2, M=2, csit="imperfect", distances=None).with_snr_db(20.0)
    p = rs_sum_rate_mc("RS-ZF", cfg, derive_power_split(cfg.P, 0.5, 2), FAST)
    assert 0.0 < p.sum_rate <= 3.0


def test_zero_interference_streams_are_pruned():
    # perfect-CSIT ZF with K=6 would need 8^6 hypotheses without pruning
    cfg = SystemConfig(N=7, K=6, M=8).with_snr_db(40.0)
    p = rs_sum_rate_mc("NoRS-ZF", cfg, None, McEstimatorSettings(n_channel=2, n_noise=2))
    assert p.sum_rate == pytest.approx(18.0, abs=1e-6)


def test_inner_enumeration_cap():
    # imperfect CSIT leaves every interfering stream live, so nothing is pruned
    cfg = SystemConfig(N=7, K=6, M=8, csit="imperfect").with_snr_db(10.0)
    with pytest.raises(ResourceCapError):
        rs_sum_rate_mc("NoRS-ZF", cfg, None, McEstimatorSettings(n_channel=1, n_noise=1))


@pytest.mark.parametrize("bad", [dict(n_channel=0), dict(workers=0), dict(normalization="none")])
def test_settings_validation(bad):
    with pytest.raises(ConfigError):
        McEstimatorSettings(**bad)
