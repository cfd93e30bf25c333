import math

import numpy as np
import pytest

from rsplit import ConfigError, SystemConfig, derive_power_split, pathloss_matrix, sample_user_distance
from rsplit.config import distance_cdf, estimate_variances, pathloss_gains


@pytest.mark.parametrize(
    "P, t, K, P_c, P_p",
    [
        (2.0, 0.5, 2, 1.0, 0.5),
        (1.0, 1.0, 3, 0.0, 1.0 / 3.0),
        (10.0, 0.0, 2, 10.0, 0.0),
    ],
)
def test_power_split_examples(P, t, K, P_c, P_p):
    split = derive_power_split(P, t, K)
    assert split.P_c == pytest.approx(P_c, abs=1e-15)
    assert split.P_p == pytest.approx(P_p, abs=1e-15)
    assert split.total == pytest.approx(P)


def test_power_split_no_rs_has_exactly_zero_common_power():
    assert derive_power_split(7.3, 1.0, 3).P_c == 0.0


@pytest.mark.parametrize("t", [-0.1, 1.01, float("nan")])
def test_power_split_rejects_bad_fraction(t):
    with pytest.raises(ConfigError):
        derive_power_split(1.0, t, 2)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(N=2, K=3),
        dict(M=3),
        dict(K=2, sigma2=(1.0, -1.0)),
        dict(P=0.0),
        dict(csit="partial"),
        dict(u=(0.2, 0.2)),
        dict(distances=(1.0,)),
        dict(distances=None, R0=5.0, R=1.0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SystemConfig(**kwargs)


def test_config_broadcasts_scalars():
    cfg = SystemConfig(N=4, K=3, sigma2=0.5, distances=2.0)
    assert cfg.sigma2 == (0.5, 0.5, 0.5)
    assert cfg.distances == (2.0, 2.0, 2.0)
    np.testing.assert_allclose(cfg.ci_weights, [1 / 3] * 3)


def test_snr_round_trip():
    cfg = SystemConfig().with_snr_db(17.0)
    assert cfg.P == pytest.approx(10**1.7)
    assert cfg.sigma2 == (1.0, 1.0)
    assert cfg.snr_db == pytest.approx(17.0)


def test_pathloss_matrix_is_diagonal_power_law():
    cfg = SystemConfig(K=2, distances=(1.0, 5.0), m_pl=2.7)
    D = pathloss_matrix(cfg)
    np.testing.assert_allclose(np.diag(D), [1.0, 5.0**-2.7])
    assert D[0, 1] == 0.0


def test_pathloss_matrix_needs_distances_for_random_drops():
    with pytest.raises(ConfigError):
        pathloss_matrix(SystemConfig(distances=None))


@pytest.mark.parametrize("u, r", [(0.0, 1.0), (1.0, 40.0), (0.25, 20.5)])
def test_distance_inverse_cdf_examples(u, r):
    assert sample_user_distance(1.0, 40.0, u=u) == pytest.approx(r)


def test_distance_samples_follow_linear_density(rng):
    r = sample_user_distance(1.0, 40.0, rng, size=200_000)
    assert r.min() >= 1.0 and r.max() <= 40.0
    # mean of density 2 (r - R0) / (R - R0)^2 is R0 + 2 (R - R0) / 3
    assert r.mean() == pytest.approx(1.0 + 2 * 39 / 3, rel=5e-3)
    for q in (10.0, 20.0, 30.0):
        assert np.mean(r <= q) == pytest.approx(distance_cdf(q, 1.0, 40.0), abs=5e-3)


def test_estimate_variances_split_the_gain_exactly():
    w = pathloss_gains([1.0, 3.0, 10.0], 2.7)
    hat, err = estimate_variances(w, 10.0)
    np.testing.assert_array_equal(hat + err, w)
    np.testing.assert_allclose(hat, 10.0 * w**2 / (10.0 * w + 1.0))


def test_estimate_variances_perfect_training_limit():
    w = np.array([0.3, 1.0])
    hat, err = estimate_variances(w, 1e12)
    assert np.all(err < 1e-11)
    np.testing.assert_allclose(hat, w)
    hat_none, err_none = estimate_variances(w, None)
    np.testing.assert_array_equal(hat_none, w)
    assert not err_none.any()
