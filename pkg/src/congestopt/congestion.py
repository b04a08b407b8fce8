"""Congestion costs, their conjugates and the convexified two-phase cost.

All costs are radial powers ``alpha * |s|**p``.  Flux and dual vectors are
arrays whose last axis holds the two components.

Convention: the low-congestion cost of the perimeter problem is usually
written ``(a/2)|s|^2``; here every cost is ``alpha|s|^p``, so that case is
``CongestionFunction(alpha=a / 2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import OrderingViolation


def _norm(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.sum(v * v, axis=-1))


def _radial_to_vector(v, mag_new):
    v = np.asarray(v, dtype=float)
    t = _norm(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(t > 0.0, mag_new / t, 0.0)
    return v * scale[..., None]


@dataclass(frozen=True)
class CongestionFunction:
    """Radial power cost ``alpha * |s|**p`` with ``alpha > 0`` and ``p > 1``."""

    alpha: float
    p: float = 2.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ValueError(f"p must be finite and > 1, got {self.p}")

    @property
    def q(self) -> float:
        """Conjugate exponent, ``1/p + 1/q = 1``."""
        return self.p / (self.p - 1.0)

    def radial(self, r):
        return self.alpha * np.asarray(r, dtype=float) ** self.p

    def radial_derivative(self, r):
        return self.alpha * self.p * np.asarray(r, dtype=float) ** (self.p - 1.0)

    def conjugate_radial(self, t):
        return kernels._power_conj_np(np.asarray(t, dtype=float), self.alpha, self.p)[0]

    def conjugate_radial_derivative(self, t):
        return kernels._power_conj_np(np.asarray(t, dtype=float), self.alpha, self.p)[1]

    def __call__(self, s):
        return self.radial(_norm(s))


def evaluate(c: CongestionFunction, s):
    """Cost density ``alpha |s|^p`` of the flux vector(s) ``s``."""
    return c(s)


def conjugate(c: CongestionFunction, xi):
    """Fenchel conjugate ``sup_s <xi, s> - alpha|s|^p``.

    Closed form ``alpha (p-1) (|xi| / (p alpha))**q``; for ``p = 2`` this is
    ``|xi|^2 / (4 alpha)``.
    """
    return c.conjugate_radial(_norm(xi))


def conjugate_gradient(c: CongestionFunction, xi):
    return _radial_to_vector(xi, c.conjugate_radial_derivative(_norm(xi)))


class SubgradientPolicy(enum.Enum):
    """Selection of the flux on the kink circle of the dual cost."""

    PREFER_H2 = "prefer_h2_branch"
    PREFER_H1 = "prefer_h1_branch"
    AVERAGE = "average"

    @property
    def code(self) -> int:
        return {
            SubgradientPolicy.PREFER_H2: kernels.POLICY_H2,
            SubgradientPolicy.PREFER_H1: kernels.POLICY_H1,
            SubgradientPolicy.AVERAGE: kernels.POLICY_AVERAGE,
        }[self]


@dataclass(frozen=True)
class EnvelopePair:
    """Convexified cost ``(H2 ^ (H1 + k))**`` of a two-phase pair and its dual.

    The convexified radial profile is ``H2`` up to ``r1``, affine with slope
    ``slope`` on ``[r1, r2]`` and ``H1 + k`` beyond ``r2``.  ``slope`` is also
    the radius of the circle on which the dual cost is not differentiable.
    When both phases coincide ``r1 = r2 = slope = inf``.
    """

    h1: CongestionFunction
    h2: CongestionFunction
    k: float
    r1: float
    r2: float
    slope: float
    policy: SubgradientPolicy = SubgradientPolicy.PREFER_H2
    params: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        prm = np.array(
            [
                self.h1.alpha,
                self.h1.p,
                self.h2.alpha,
                self.h2.p,
                self.k,
                self.slope,
                self.r1,
                self.r2,
                1.0 if self.degenerate else 0.0,
            ]
        )
        prm.setflags(write=False)
        object.__setattr__(self, "params", prm)

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.r1)

    @property
    def kink(self) -> float:
        return self.slope

    def with_policy(self, policy: SubgradientPolicy) -> "EnvelopePair":
        return EnvelopePair(self.h1, self.h2, self.k, self.r1, self.r2, self.slope, policy)

    def radial(self, r):
        return kernels.envelope_radial_np(r, self.params)

    def primal(self, s):
        return self.radial(_norm(s))

    def dual_radial(self, t):
        h2 = self.h2.conjugate_radial(t)
        if self.degenerate:
            return h2
        return np.maximum(h2, self.h1.conjugate_radial(t) - self.k)

    def dual(self, xi):
        return self.dual_radial(_norm(xi))

    def dual_gradient(self, xi, policy: SubgradientPolicy | None = None):
        policy = self.policy if policy is None else policy
        _, r = kernels.radial_dual_np(_norm(xi), self.params, 0.0, policy.code)
        return _radial_to_vector(xi, r)

    def smoothed_dual(self, xi, mu: float):
        """Moreau-smoothed dual cost (conjugate of ``H + mu|s|^2/2``) and its gradient."""
        if mu <= 0:
            raise ValueError("smoothing width must be positive")
        val, r = kernels.radial_dual_np(_norm(xi), self.params, float(mu), self.policy.code)
        return val, _radial_to_vector(xi, r)

    def theta(self, sigma_mag):
        sigma_mag = np.asarray(sigma_mag, dtype=float)
        if self.degenerate:
            return np.zeros_like(sigma_mag)
        return np.clip((sigma_mag - self.r1) / (self.r2 - self.r1), 0.0, 1.0)

    def mixture_cost(self, sigma_mag):
        """Cost of the optimal two-phase microstructure carrying flux ``sigma_mag``.

        On the mixing range the improved phase carries ``r2`` and the other
        phase ``r1``, in proportions ``theta`` and ``1 - theta``.
        """
        r = np.asarray(sigma_mag, dtype=float)
        if self.degenerate:
            return self.h2.radial(r)
        th = self.theta(r)
        mixed = th * (self.h1.radial(self.r2) + self.k) + (1.0 - th) * self.h2.radial(self.r1)
        return np.where(
            r <= self.r1,
            self.h2.radial(r),
            np.where(r >= self.r2, self.h1.radial(r) + self.k, mixed),
        )


def lower_convex_envelope(x, y):
    """Lower convex envelope of sampled points, evaluated back at ``x``.

    Returns ``(values, hull_indices)``; the hull is computed with Andrew's
    monotone chain.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if np.any(np.diff(x) <= 0):
        raise ValueError("x must be strictly increasing")
    idx = kernels.lower_hull_indices(x, y)
    return np.interp(x, x[idx], y[idx]), idx


def _check_ordering(h1, h2):
    r = np.concatenate([np.linspace(0.0, 10.0, 2001), np.logspace(-6, 4, 401)])
    d1, d2 = h1.radial(r), h2.radial(r)
    bad = d2 < d1 - 1e-12 * np.maximum(1.0, np.abs(d2))
    if bad.any():
        r_bad = float(r[np.argmax(bad)])
        raise OrderingViolation(f"H2 < H1 at |s| = {r_bad:g}")


def _closed_form_thresholds(h1, h2, k):
    p, q = h1.p, h1.q
    coef = (p - 1.0) * p ** (-q) * (h1.alpha ** (1.0 - q) - h2.alpha ** (1.0 - q))
    slope = (k / coef) ** (1.0 / q)
    r1 = (slope / (p * h2.alpha)) ** (1.0 / (p - 1.0))
    r2 = (slope / (p * h1.alpha)) ** (1.0 / (p - 1.0))
    return r1, r2, slope


def _hull_thresholds(h1, h2, k, n_samples):
    # first radius where H1 + k < H2, by bisection
    def gap(r):
        return float(h2.radial(r) - h1.radial(r) - k)

    hi = 1.0
    while gap(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            raise OrderingViolation("H2 - H1 never exceeds k; phases do not separate")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if gap(mid) <= 0 else (lo, mid)
    r_max = 4.0 * hi
    for _ in range(30):
        r = np.linspace(0.0, r_max, n_samples)
        g = np.minimum(h2.radial(r), h1.radial(r) + k)
        idx = kernels.lower_hull_indices(r, g)
        jumps = np.diff(idx)
        j = int(np.argmax(jumps))
        if jumps[j] <= 1:
            raise OrderingViolation("no affine bridge found in the convexified cost")
        i1, i2 = idx[j], idx[j + 1]
        if r[i2] < 0.9 * r_max:
            slope = (g[i2] - g[i1]) / (r[i2] - r[i1])
            return float(r[i1]), float(r[i2]), float(slope)
        r_max *= 2.0
    raise RuntimeError("could not bracket the upper threshold")


def build_envelope(
    h1: CongestionFunction,
    h2: CongestionFunction,
    k: float,
    *,
    policy: SubgradientPolicy = SubgradientPolicy.PREFER_H2,
    method: str = "auto",
    n_samples: int = 100_000,
) -> EnvelopePair:
    """Convexify ``min(H2, H1 + k)`` and locate the thresholds ``r1 < r2``.

    ``method="closed_form"`` uses slope matching of the bridge (exponents must
    agree), ``"hull"`` the sampled lower convex envelope, ``"auto"`` the
    closed form whenever it applies.
    """
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"k must be positive and finite, got {k}")
    _check_ordering(h1, h2)
    if h1 == h2:
        return EnvelopePair(h1, h2, k, math.inf, math.inf, math.inf, policy)
    if method == "auto":
        method = "closed_form" if h1.p == h2.p else "hull"
    if method == "closed_form":
        if h1.p != h2.p:
            raise ValueError("closed-form thresholds need equal exponents")
        r1, r2, slope = _closed_form_thresholds(h1, h2, k)
    elif method == "hull":
        r1, r2, slope = _hull_thresholds(h1, h2, k, n_samples)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EnvelopePair(h1, h2, float(k), float(r1), float(r2), float(slope), policy)


def quadratic_pair(a: float, b: float, k: float, **kw) -> EnvelopePair:
    """Envelope of ``H1 = a|s|^2``, ``H2 = b|s|^2`` with area price ``k``."""
    return build_envelope(CongestionFunction(a, 2.0), CongestionFunction(b, 2.0), k, **kw)


def envelope_primal(e: EnvelopePair, s):
    return e.primal(s)


def envelope_dual(e: EnvelopePair, xi):
    """``max(H2*(xi), H1*(xi) - k)``."""
    return e.dual(xi)


def envelope_dual_gradient(e: EnvelopePair, xi, policy: SubgradientPolicy | None = None):
    return e.dual_gradient(xi, policy)


def theta_from_flux(e: EnvelopePair, sigma_mag):
    return e.theta(sigma_mag)
