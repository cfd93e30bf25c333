"""Special-function kernel: log-gamma, Kummer's 1F1 and the Gamma-Gaussian integral.

``gamma_gauss_mgf`` evaluates ``E[exp(-q Y^2)]`` for ``Y ~ Gamma(shape, rate)``,
the inner expectation of the CI interference term. Its closed form is a
difference of two confluent hypergeometric functions,

    E = (2 sqrt(z))^a / (2 Gamma(a)) * [ Gamma(a/2) 1F1(a/2; 1/2; z)
                                         - 2 sqrt(z) Gamma((a+1)/2) 1F1((a+1)/2; 3/2; z) ]

with ``a = shape`` and ``z = rate^2 / (4 q)``. The bracket cancels
catastrophically once ``z`` is large, so the robust evaluator switches to a
generalized Gauss-Laguerre rule there.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, NumericError

MAX_TERMS = 10_000
SERIES_TOL = 1e-17
CANCELLATION_LIMIT = 1e6


def ln_gamma(x: float) -> float:
    """``log |Gamma(x)|``."""
    return math.lgamma(x)


def _check_b(b: float) -> None:
    if b <= 0 and float(b).is_integer():
        raise ConfigError(f"1F1 undefined for non-positive integer b={b}")


class _Cancellation(Exception):
    pass


def _log_series(a: float, b: float, z: float):
    """Log of the Maclaurin series, returned as ``(log|S|, sign)``.

    The running sum is rescaled whenever it grows past 1e250 so arguments
    far beyond the double range of ``exp(z)`` stay representable. Raises
    ``_Cancellation`` when alternating terms wipe out too many digits.
    """
    term = 1.0
    total = 1.0
    log_scale = 0.0
    peak = 1.0
    for j in range(MAX_TERMS):
        term *= (a + j) / (b + j) * z / (j + 1)
        total += term
        peak = max(peak, abs(term))
        if abs(total) > 1e250:
            s = abs(total)
            log_scale += math.log(s)
            term /= s
            peak /= s
            total = math.copysign(1.0, total)
        if term == 0.0:
            break
        if abs(term) <= SERIES_TOL * abs(total) and abs((a + j) * z) < abs((b + j) * (j + 1)):
            break
    else:
        raise NumericError(f"1F1({a}, {b}, {z}) series did not converge in {MAX_TERMS} terms")
    if total == 0.0 or peak > CANCELLATION_LIMIT * abs(total):
        raise _Cancellation
    return log_scale + math.log(abs(total)), math.copysign(1.0, total)


def _log_asymptotic(a: float, b: float, z: float):
    """Large positive ``z`` expansion, ``Gamma(b)/Gamma(a) e^z z^(a-b) sum_s (b-a)_s (1-a)_s / s! z^-s``."""
    total = 1.0
    term = 1.0
    for s in range(200):
        nxt = term * (b - a + s) * (1 - a + s) / ((s + 1) * z)
        if abs(nxt) > abs(term):
            break
        term = nxt
        total += term
        if abs(term) < SERIES_TOL * abs(total):
            break
    if abs(term) > 1e-15 * abs(total):
        raise _Cancellation
    return ln_gamma(b) - ln_gamma(a) + z + (a - b) * math.log(z) + math.log(abs(total)), math.copysign(1.0, total)


def _log_extended(a: float, b: float, z: float):
    """Fallback in extended precision for the cancelling corner of the domain."""
    import mpmath

    with mpmath.workdps(60):
        v = mpmath.hyp1f1(a, b, z)
        if v == 0:
            return -math.inf, 0.0
        return float(mpmath.log(abs(v))), (1.0 if v > 0 else -1.0)


def log_kummer_1f1(a: float, b: float, z: float):
    """``(log|1F1(a; b; z)|, sign)`` for real arguments.

    Positive arguments use the Maclaurin series (all terms positive for
    ``a, b > 0``) or, for ``z > 5000``, the asymptotic expansion. Negative
    arguments go through Kummer's transformation
    ``1F1(a; b; z) = e^z 1F1(b - a; b; -z)``. Parameter combinations whose
    series still alternates and cancels are evaluated in extended precision.
    """
    _check_b(b)
    if z == 0.0 or a == 0.0:
        return 0.0, 1.0
    try:
        if z < 0.0:
            if a < 0 and float(a).is_integer():
                # terminating polynomial; the transformed series would not terminate
                return _log_series(a, b, z)
            log_v, sign = _log_series_or_asymptotic(b - a, b, -z)
            return z + log_v, sign
        return _log_series_or_asymptotic(a, b, z)
    except _Cancellation:
        return _log_extended(a, b, z)


def _log_series_or_asymptotic(a: float, b: float, z: float):
    if z > 5000.0 and a > 0 and b > 0:
        return _log_asymptotic(a, b, z)
    return _log_series(a, b, z)


def kummer_1f1(a: float, b: float, z: float) -> float:
    """Confluent hypergeometric function ``1F1(a; b; z)`` (Kummer's M)."""
    log_v, sign = log_kummer_1f1(float(a), float(b), float(z))
    if log_v > 709.0:
        raise NumericError(f"1F1({a}, {b}, {z}) overflows double precision")
    return sign * math.exp(log_v)


# -- Gamma-Gaussian integral -------------------------------------------------------


def _hypergeometric_terms(q: float, shape: float, rate: float):
    """Log-prefactor and the two log-terms of the closed form, with their signs."""
    a = float(shape)
    z = rate * rate / (4.0 * q)
    l1, s1 = log_kummer_1f1(a / 2.0, 0.5, z)
    l2, s2 = log_kummer_1f1((a + 1.0) / 2.0, 1.5, z)
    log_pref = a * math.log(2.0 * math.sqrt(z)) - math.log(2.0) - ln_gamma(a)
    t1 = ln_gamma(a / 2.0) + l1
    t2 = math.log(2.0) + 0.5 * math.log(z) + ln_gamma((a + 1.0) / 2.0) + l2
    ref = max(t1, t2)
    bracket = s1 * math.exp(t1 - ref) - s2 * math.exp(t2 - ref)
    return log_pref + ref, bracket


def gamma_gauss_mgf_hypergeometric(q: float, shape: float, rate: float) -> float:
    """Closed form of ``E[exp(-q Y^2)]``, ``Y ~ Gamma(shape, rate)``, via two 1F1 terms.

    Accurate while ``z = rate^2 / (4 q)`` is moderate; see module notes.
    """
    if q <= 0.0:
        return 1.0
    log_scale, bracket = _hypergeometric_terms(q, shape, rate)
    if bracket <= 0.0:
        return 0.0
    return math.exp(log_scale + math.log(bracket))


def _gamma_gauss_quadrature(q: float, shape: float, rate: float, n: int = 64) -> float:
    from .quadrature import gamma_expectation_rule

    y, p = gamma_expectation_rule(shape, 1.0 / rate, n)
    return float(np.dot(p, np.exp(-q * y * y)))


def gamma_gauss_mgf(q: float, shape: float, rate: float, max_digits_lost: float = 5.0) -> float:
    """``E[exp(-q Y^2)]`` for ``Y ~ Gamma(shape, rate)``, robust over all ``q >= 0``.

    Uses the hypergeometric closed form unless its two terms cancel to fewer
    than ``16 - max_digits_lost`` significant digits, in which case a 64-point
    generalized Gauss-Laguerre rule is used (the integrand is then a slowly
    varying Gaussian over the bulk of the Gamma density).
    """
    if not shape > 0 or not rate > 0:
        raise ConfigError("Gamma shape and rate must be positive")
    if q <= 0.0:
        return 1.0
    log_scale, bracket = _hypergeometric_terms(q, shape, rate)
    if bracket > 10.0 ** (-max_digits_lost):
        return math.exp(log_scale + math.log(bracket))
    return _gamma_gauss_quadrature(q, shape, rate)


def gamma_density(y, shape: float, rate: float):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_pdf = shape * math.log(rate) + (shape - 1.0) * np.log(y) - rate * y - ln_gamma(shape)
    return np.where(y > 0, np.exp(log_pdf), 0.0)
