"""Closed-form references for validating Monte Carlo scores."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import norm

from spacescore.core import check_budget


def single_point_ei_oracle(mu: float, sigma: float, incumbent: float) -> float:
    """Expected improvement ``E[max(0, incumbent - y)]`` for ``y ~ N(mu, sigma^2)``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    gap = incumbent - mu
    if sigma == 0:
        return max(0.0, gap)
    z = gap / sigma
    return float(sigma * norm.pdf(z) + gap * norm.cdf(z))


def single_point_pi_oracle(mu: float, sigma: float, incumbent: float) -> float:
    """Probability ``P(y < incumbent)`` for ``y ~ N(mu, sigma^2)``."""
    if sigma == 0:
        return float(mu < incumbent)
    return float(norm.cdf((incumbent - mu) / sigma))


def grid_min_order_statistics_oracle(values, b: int, incumbent: float) -> float:
    """Exact ``E[max(0, incumbent - min)]`` over ``b`` draws with replacement.

    With sorted values ``v_(1) <= ... <= v_(N)`` the minimum equals ``v_(k)`` with
    probability ``((N - k + 1) / N)^b - ((N - k) / N)^b``.
    """
    b = check_budget(b)
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if n == 0:
        raise ValueError("values must be non-empty")
    k = np.arange(1, n + 1)
    p = ((n - k + 1) / n) ** b - ((n - k) / n) ** b
    return float(np.sum(np.maximum(0.0, incumbent - v) * p))


def grid_min_improvement_probability(values, b: int, incumbent: float) -> float:
    """Exact ``P(min < incumbent)`` over ``b`` draws with replacement."""
    b = check_budget(b)
    v = np.asarray(values, dtype=float)
    return 1.0 - math.pow(np.mean(v >= incumbent), b)
