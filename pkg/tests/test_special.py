import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, special, stats

from rsplit import NumericError
from rsplit.analytic.special import (
    gamma_density,
    gamma_gauss_mgf,
    gamma_gauss_mgf_hypergeometric,
    kummer_1f1,
    ln_gamma,
    log_kummer_1f1,
)


@pytest.mark.parametrize("a, b", [(0.5, 0.5), (2.0, 1.5), (7.0, 3.0), (-3.0, 2.0)])
def test_1f1_at_zero(a, b):
    assert kummer_1f1(a, b, 0.0) == 1.0


@pytest.mark.parametrize("z", [-30.0, -1.0, 0.3, 12.0, 200.0])
def test_1f1_exponential_identity(z):
    assert kummer_1f1(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-12)


def test_1f1_erf_oracle():
    # 1F1(1/2; 3/2; -x^2) = sqrt(pi) erf(x) / (2x)
    expected = math.sqrt(math.pi) * math.erf(1.0) / 2.0
    assert kummer_1f1(0.5, 1.5, -1.0) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.746824, abs=1e-6)


def test_1f1_terminating_polynomial():
    # 1F1(-2; b; z) = 1 - 2z/b + z^2 / (b (b+1))
    b, z = 1.5, -4.0
    assert kummer_1f1(-2.0, b, z) == pytest.approx(1 - 2 * z / b + z * z / (b * (b + 1)), rel=1e-14)


@pytest.mark.parametrize("a", [0.5, 1.7, 4.0, 15.0])
@pytest.mark.parametrize("b", [0.5, 1.5, 3.0])
@pytest.mark.parametrize("z", [-40.0, -5.0, -0.1, 0.1, 5.0, 60.0, 400.0])
def test_1f1_against_mpmath(a, b, z):
    ref = mpmath.hyp1f1(a, b, z)
    log_v, sign = log_kummer_1f1(a, b, z)
    assert sign == (1.0 if ref > 0 else -1.0)
    assert log_v == pytest.approx(float(mpmath.log(abs(ref))), abs=1e-9)


def test_1f1_matches_scipy_in_its_comfortable_range():
    for a in (0.5, 2.0, 6.0):
        for b in (0.5, 1.5):
            for z in np.linspace(-10, 10, 9):
                assert kummer_1f1(a, b, z) == pytest.approx(special.hyp1f1(a, b, z), rel=1e-9)


def test_1f1_large_argument_uses_asymptotics():
    log_v, _ = log_kummer_1f1(3.0, 0.5, 1e5)
    assert log_v == pytest.approx(float(mpmath.log(mpmath.hyp1f1(3, 0.5, 1e5))), rel=1e-10)


def test_1f1_overflow_is_reported():
    with pytest.raises(NumericError):
        kummer_1f1(1.0, 1.0, 800.0)


def test_1f1_rejects_nonpositive_integer_b():
    with pytest.raises(Exception):
        kummer_1f1(1.0, -2.0, 1.0)


def _mgf_quad(q, shape, rate):
    pdf = stats.gamma(shape, scale=1.0 / rate).pdf
    return integrate.quad(lambda y: pdf(y) * math.exp(-q * y * y), 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]


@pytest.mark.parametrize("shape", [1.0, 2.0, 3.0, 6.0, 20.0])
@pytest.mark.parametrize("rate", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("q", [1e-3, 0.1, 1.0, 30.0])
def test_gamma_gauss_kernel_against_integral(shape, rate, q):
    assert gamma_gauss_mgf(q, shape, rate) == pytest.approx(_mgf_quad(q, shape, rate), rel=1e-6)


def test_closed_form_agrees_where_well_conditioned():
    assert gamma_gauss_mgf_hypergeometric(1.0, 2.0, 1.0) == pytest.approx(_mgf_quad(1.0, 2.0, 1.0), rel=1e-9)


def test_kernel_limits():
    assert gamma_gauss_mgf(0.0, 3.0, 1.0) == 1.0
    assert gamma_gauss_mgf(1e8, 3.0, 1.0) < 1e-10


def test_ln_gamma_and_density():
    assert ln_gamma(5.0) == pytest.approx(math.log(24.0))
    y = np.linspace(0.01, 10, 50)
    np.testing.assert_allclose(gamma_density(y, 2.5, 1.5), stats.gamma(2.5, scale=1 / 1.5).pdf(y), rtol=1e-12)
    assert gamma_density(np.array([-1.0, 0.0]), 2.0, 1.0).tolist() == [0.0, 0.0]
