"""Closed-form and Jensen-approximated ergodic rates plus their numerical kernels.

The rate evaluators live in :mod:`rsplit.analytic.rates`; this package
namespace only re-exports the special-function and quadrature kernels so
lower layers can use them without import cycles.
"""

from .quadrature import QuadratureRule, annulus_rule, gamma_expectation_rule, quadrature_rule
from .special import kummer_1f1, ln_gamma, log_kummer_1f1

__all__ = [
    "QuadratureRule",
    "annulus_rule",
    "gamma_expectation_rule",
    "kummer_1f1",
    "ln_gamma",
    "log_kummer_1f1",
    "quadrature_rule",
]
