import math

import numpy as np
import pytest

from rsplit import ConfigError, SystemConfig, derive_power_split
from rsplit.analytic.gamma_fit import gamma_fit_moments
from rsplit.analytic.rates import (
    analytic_rates,
    analytic_sum_rate,
    ci_common_rate_analytic,
    ci_private_rate_analytic,
    largeN_rates_imperfect,
    zf_common_rate_analytic,
    zf_private_rate_analytic,
)
from rsplit.rate_mc import McEstimatorSettings, private_rate_mc

CFG = SystemConfig(N=3, K=2, M=4)


def test_row_norm_fit_has_fixed_shape():
    fit = gamma_fit_moments("row_norm_A", CFG, 0, n_draws=20_000)
    assert fit.shape == 12.0
    # E ||A_k||^2 = N (N + 1) + N (K - 1) for unit gains
    assert fit.mean == pytest.approx(3 * 4 + 3, rel=0.03)


def test_mrt_sum_fit_mean():
    fit = gamma_fit_moments("mrt_sum_Y", CFG, 0, n_draws=20_000)
    # E Re(sum_i A_ki) = E ||h_k||^2 = N
    assert fit.mean == pytest.approx(3.0, rel=0.03)


def test_fits_are_memoized():
    assert gamma_fit_moments("ci_gain", CFG, 1) is gamma_fit_moments("ci_gain", CFG, 1)


@pytest.mark.parametrize(
    "args",
    [("other", CFG, 0), ("ci_gain", CFG, 2), ("ci_gain", CFG.replace(distances=None, csit="imperfect"), 0)],
)
def test_fit_argument_checks(args):
    with pytest.raises(ConfigError):
        gamma_fit_moments(*args)


@pytest.mark.parametrize("kind", ["CI", "ZF"])
def test_common_rate_vanishes_without_common_power(kind):
    cfg = CFG.with_snr_db(10.0)
    split = derive_power_split(cfg.P, 1.0, 2)
    fn = ci_common_rate_analytic if kind == "CI" else zf_common_rate_analytic
    assert fn(0, cfg, split) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("scheme, M", [("RS-CI", 4), ("RS-ZF", 4), ("RS-ZF", 2)])
def test_high_snr_saturation(scheme, M):
    cfg = CFG.replace(M=M).with_snr_db(45.0)
    assert analytic_sum_rate(scheme, cfg, derive_power_split(cfg.P, 0.3, 2)) == pytest.approx(3 * math.log2(M), abs=0.05)


def test_no_rs_sum_uses_private_rates_only():
    cfg = CFG.with_snr_db(5.0)
    common, private = analytic_rates("NoRS-ZF", cfg)
    assert common == [0.0, 0.0]
    assert analytic_sum_rate("NoRS-ZF", cfg) == pytest.approx(sum(private))


def test_zf_private_rate_is_increasing_in_snr():
    rates = [zf_private_rate_analytic(0, CFG.with_snr_db(s)) for s in range(-10, 30, 5)]
    assert all(b >= a for a, b in zip(rates, rates[1:]))


def test_ci_private_single_user_tracks_monte_carlo():
    settings = McEstimatorSettings(n_channel=300, n_noise=20)
    for snr in (0.0, 10.0):
        cfg = SystemConfig(N=3, K=1, M=4).with_snr_db(snr)
        mc = private_rate_mc(0, "NoRS-CI", cfg, None, settings).rate
        assert ci_private_rate_analytic(0, cfg) == pytest.approx(mc, abs=0.1)


def test_printed_form_runs_and_differs():
    cfg = CFG.with_snr_db(10.0)
    split = derive_power_split(cfg.P, 0.5, 2)
    printed = ci_common_rate_analytic(0, cfg, split, form="printed")
    assert 0.0 <= printed <= 2.0
    assert printed != ci_common_rate_analytic(0, cfg, split)
    with pytest.raises(ConfigError):
        ci_common_rate_analytic(0, cfg, split, form="other")


def test_analytic_needs_perfect_csit():
    with pytest.raises(ConfigError):
        analytic_rates("RS-CI", CFG.replace(csit="imperfect"), derive_power_split(1.0, 0.5, 2))


@pytest.mark.parametrize("scheme", ["RS-CI", "RS-ZF"])
def test_large_n_rates(scheme):
    cfg = SystemConfig(N=16, K=2, M=4, csit="imperfect").with_snr_db(5.0)
    split = derive_power_split(cfg.P, 0.3, 2)
    common, private, nors = largeN_rates_imperfect(0, scheme, cfg, split)
    assert 0.0 <= common <= 2.0 and 0.0 <= private <= nors <= 2.0
    jensen = largeN_rates_imperfect(0, scheme, cfg, split, noise="jensen")
    # integrating the noise exactly can only lower the private rate relative to the Jensen form
    assert jensen[1] >= private - 1e-12
    with pytest.raises(ConfigError):
        largeN_rates_imperfect(0, scheme, cfg, split, noise="laplace")


def test_large_n_random_drops_average_over_locations():
    cfg = SystemConfig(N=16, K=2, M=2, csit="imperfect", distances=None, R=10.0).with_snr_db(20.0)
    rates = largeN_rates_imperfect(1, "RS-ZF", cfg, derive_power_split(cfg.P, 0.5, 2))
    assert all(0.0 <= r <= 1.0 for r in rates)
