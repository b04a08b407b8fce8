"""Width-relaxed cost of a one-dimensional road network.

A road of multiplicity (width) ``a >= 1`` carrying flux ``sigma`` costs
``k a + alpha |sigma|^p / a^(p-1)`` per unit length.  Minimising over ``a``
gives a closed-form cost and width law, implemented here for power costs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NetworkCostParams:
    alpha: float
    p: float
    k: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.p > 1 and self.k > 0):
            raise ValueError(f"need alpha > 0, p > 1, k > 0; got {self}")
        if not all(math.isfinite(v) for v in (self.alpha, self.p, self.k)):
            raise ValueError("parameters must be finite")

    @property
    def threshold(self) -> float:
        """Flux ``t*`` above which widening the road pays off."""
        return (self.k / (self.alpha * (self.p - 1.0))) ** (1.0 / self.p)

    def width_cost(self, a, sigma_mag):
        """Cost per length ``k a + alpha s^p / a^(p-1)`` at a fixed width."""
        a = np.asarray(a, dtype=float)
        s = np.asarray(sigma_mag, dtype=float)
        return self.k * a + self.alpha * s**self.p / a ** (self.p - 1.0)


def relaxed_cost(params: NetworkCostParams, sigma_mag):
    alpha, p, k = params.alpha, params.p, params.k
    s = np.asarray(sigma_mag, dtype=float)
    if np.any(s < 0):
        raise ValueError("flux magnitude must be nonnegative")
    low = alpha * s**p + k
    high = s * alpha ** (1.0 / p) * p * (k / (p - 1.0)) ** (1.0 - 1.0 / p)
    out = np.where(s**p <= k / (alpha * (p - 1.0)), low, high)
    return out if out.ndim else float(out)


def optimal_width(params: NetworkCostParams, sigma_mag):
    alpha, p, k = params.alpha, params.p, params.k
    s = np.asarray(sigma_mag, dtype=float)
    if np.any(s < 0):
        raise ValueError("flux magnitude must be nonnegative")
    out = np.maximum(1.0, s * (alpha * (p - 1.0) / k) ** (1.0 / p))
    return out if out.ndim else float(out)


def cost_table(params: NetworkCostParams, sigma_values):
    """Rows ``(sigma, width, cost)`` for a list of flux magnitudes."""
    s = np.asarray(sigma_values, dtype=float)
    return np.column_stack([s, optimal_width(params, s), relaxed_cost(params, s)])
