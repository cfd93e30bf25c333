"""Gauss-Legendre, (generalized) Gauss-Laguerre and Gauss-Jacobi rules via Golub-Welsch."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ConfigError

MIN_ORDER, MAX_ORDER = 2, 64


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of an ``n``-point Gauss rule.

    Legendre rules integrate over ``[-1, 1]`` with unit weight function.
    Laguerre rules integrate over ``[0, inf)`` against ``x^alpha e^-x``.
    Jacobi rules integrate over ``[0, 1]`` against ``x^alpha``.
    """

    kind: str
    nodes: np.ndarray
    weights: np.ndarray
    n: int
    alpha: float = 0.0

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=None)
def _rule(kind: str, n: int, alpha: float):
    k = np.arange(1, n, dtype=float)
    if kind == "legendre":
        diag = np.zeros(n)
        off = k / np.sqrt(4.0 * k * k - 1.0)
    elif kind == "laguerre":
        diag = 2.0 * np.arange(n) + alpha + 1.0
        off = np.sqrt(k * (k + alpha))
    elif kind == "jacobi":
        # P^(0, alpha) on [-1, 1], weight (1 + x)^alpha, mapped to [0, 1] below
        j = 2.0 * np.arange(n) + alpha
        with np.errstate(invalid="ignore", divide="ignore"):
            diag = alpha**2 / (j * (j + 2.0))
        diag[0] = alpha / (alpha + 2.0)
        jk = 2.0 * k + alpha
        off = 2.0 / jk * np.sqrt(k * k * (k + alpha) ** 2 / ((jk - 1.0) * (jk + 1.0)))
    else:
        raise ConfigError(f"unknown quadrature kind {kind!r}")
    jacobi = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    nodes, vecs = np.linalg.eigh(jacobi)
    # probability weights; the total mass of the weight function is applied by callers
    weights = vecs[0, :] ** 2
    order = np.argsort(nodes)
    nodes, weights = nodes[order], weights[order]
    if kind == "legendre":
        # exact symmetry of the classical rule
        nodes = 0.5 * (nodes - nodes[::-1])
        weights = 0.5 * (weights + weights[::-1])
    if kind == "jacobi":
        nodes = 0.5 * (nodes + 1.0)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def quadrature_rule(kind: str, n: int, alpha: float = 0.0) -> QuadratureRule:
    """Build an ``n``-point rule, ``kind`` in ``{"legendre", "laguerre", "jacobi"}``.

    ``alpha`` selects the generalized Laguerre weight ``x^alpha e^-x`` or the
    Jacobi weight ``x^alpha`` on ``[0, 1]`` and must be ``> -1``; it is
    ignored for Legendre.
    """
    kind = kind.lower()
    if not MIN_ORDER <= int(n) <= MAX_ORDER or int(n) != n:
        raise ConfigError(f"quadrature order must be an integer in [{MIN_ORDER}, {MAX_ORDER}], got {n}")
    if kind == "legendre":
        alpha = 0.0
    elif not alpha > -1.0:
        raise ConfigError(f"Laguerre alpha must exceed -1, got {alpha}")
    nodes, weights = _rule(kind, int(n), float(alpha))
    mu0 = {"legendre": 2.0, "laguerre": math.gamma(alpha + 1.0), "jacobi": 1.0 / (alpha + 1.0)}[kind]
    weights = mu0 * weights
    return QuadratureRule(kind=kind, nodes=nodes, weights=weights, n=int(n), alpha=float(alpha))


def gamma_expectation_rule(shape: float, scale: float, n: int = 24):
    """Nodes ``y_r`` and weights ``p_r`` with ``E f(Y) ~ sum p_r f(y_r)``, ``Y ~ Gamma(shape, scale)``."""
    if not MIN_ORDER <= int(n) <= MAX_ORDER:
        raise ConfigError(f"quadrature order must be an integer in [{MIN_ORDER}, {MAX_ORDER}], got {n}")
    if not shape > 0:
        raise ConfigError(f"Gamma shape must be positive, got {shape}")
    nodes, weights = _rule("laguerre", int(n), float(shape) - 1.0)
    return scale * nodes, weights


def annulus_rule(R0: float, R: float, order: int = 24):
    """Distances and weights for averaging over users uniform in ``[R0, R]``.

    Path-loss gains ``r^-m`` change fastest near ``R0``, so the interval is
    cut into octaves ``[R0, 2 R0, 4 R0, ..., R]`` (equal slices if ``R0`` is
    zero). Each panel carries an ``order``-point Legendre rule, and the
    weights include the distance density ``2 (r - R0) / (R - R0)^2``.
    """
    rule = quadrature_rule("legendre", order)
    if R0 > 0:
        count = max(1, math.ceil(math.log2(R / R0) - 1e-9))
        edges = R0 * (R / R0) ** (np.arange(count + 1) / count)
    else:
        edges = np.linspace(R0, R, 7)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    r = (half * rule.nodes + 0.5 * (right + left)).ravel()
    w = (half * rule.weights).ravel() * 2.0 * (r - R0) / (R - R0) ** 2
    return r, w
