"""Hot loops of the dual solver and of the raster geometry.

Every public kernel dispatches at call time on :data:`congestopt._accel.USE_NUMBA`
between a compiled loop (``*_nb``) and a vectorised numpy/scipy fallback
(``*_np``).  Both paths are kept numerically equivalent up to round-off and
are cross-checked in the test-suite and in ``benchmarks/bench_kernels.py``.

Envelope parameters are passed to the kernels packed in a float64 vector::

    prm = [alpha1, p1, alpha2, p2, k, slope, r1, r2, degenerate]

where ``slope`` is the slope of the affine bridge of the convexified cost
(it is also the radius of the kink circle of the dual cost) and
``degenerate`` is 1.0 when the two phases coincide.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from . import _accel
from ._accel import njit

POLICY_H2, POLICY_H1, POLICY_AVERAGE = 0, 1, 2
_BIG = 1.0e20


# ---------------------------------------------------------------------------
# radial dual response
# ---------------------------------------------------------------------------

@njit
def _power_conj(t, alpha, p):
    if p == 2.0:
        return t * t / (4.0 * alpha), t / (2.0 * alpha)
    r = (t / (p * alpha)) ** (1.0 / (p - 1.0))
    return alpha * (p - 1.0) * r**p, r


@njit
def _solve_branch(t, alpha, p, mu, lo, hi):
    # root of alpha*p*r**(p-1) + mu*r = t on [lo, hi]; the left side is increasing
    if p == 2.0:
        r = t / (2.0 * alpha + mu)
        return min(max(r, lo), hi)
    if hi > t / mu:
        hi = t / mu
    if lo >= hi:
        return lo
    r = 0.5 * (lo + hi)
    for _ in range(200):
        g = alpha * p * r ** (p - 1.0) + mu * r - t
        if g > 0.0:
            hi = r
        else:
            lo = r
        dg = alpha * p * (p - 1.0) * r ** (p - 2.0) + mu if r > 0.0 else math.inf
        rn = r - g / dg
        if not (lo < rn < hi):
            rn = 0.5 * (lo + hi)
        if abs(rn - r) <= 1e-15 * max(1.0, r):
            r = rn
            break
        r = rn
    return r


@njit
def _pow(x, p):
    # generic pow is several times slower than a square inside a compiled loop
    if p == 2.0:
        return x * x
    return x**p


@njit
def _envelope_radial(r, prm):
    a1, p1, a2, p2, k, s, r1, r2 = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7]
    if prm[8] != 0.0 or r <= r1:
        return a2 * _pow(r, p2)
    if r >= r2:
        return a1 * _pow(r, p1) + k
    return a2 * _pow(r1, p2) + s * (r - r1)


@njit
def radial_dual(t, prm, mu, policy):
    """Value of the (optionally smoothed) dual cost at ``|xi| = t`` and the
    magnitude of its gradient."""
    a1, p1, a2, p2, k, s, r1, r2 = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7]
    deg = prm[8] != 0.0
    if t <= 0.0:
        return 0.0, 0.0
    if mu == 0.0:
        v2, g2 = _power_conj(t, a2, p2)
        if deg:
            return v2, g2
        v1, g1 = _power_conj(t, a1, p1)
        v1 -= k
        if v2 > v1:
            return v2, g2
        if v1 > v2:
            return v1, g1
        if policy == POLICY_H1:
            return v1, g1
        if policy == POLICY_AVERAGE:
            return v1, 0.5 * (g1 + g2)
        return v2, g2
    if deg:
        r = _solve_branch(t, a2, p2, mu, 0.0, math.inf)
    else:
        t_lo = a2 * p2 * _pow(r1, p2 - 1.0) + mu * r1
        t_hi = a1 * p1 * _pow(r2, p1 - 1.0) + mu * r2
        if t <= t_lo:
            r = _solve_branch(t, a2, p2, mu, 0.0, r1)
        elif t >= t_hi:
            r = _solve_branch(t, a1, p1, mu, r2, math.inf)
        else:
            r = min(max((t - s) / mu, r1), r2)
    return t * r - _envelope_radial(r, prm) - 0.5 * mu * r * r, r


def _power_conj_np(t, alpha, p):
    if p == 2.0:
        return t * t / (4.0 * alpha), t / (2.0 * alpha)
    r = (t / (p * alpha)) ** (1.0 / (p - 1.0))
    return alpha * (p - 1.0) * r**p, r


def _solve_branch_np(t, alpha, p, mu, lo, hi):
    t = np.asarray(t, dtype=float)
    if p == 2.0:
        return np.clip(t / (2.0 * alpha + mu), lo, hi)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), t.shape).copy()
    hi = np.minimum(np.broadcast_to(np.asarray(hi, dtype=float), t.shape), t / mu)
    hi = np.maximum(hi, lo)
    r = 0.5 * (lo + hi)
    for _ in range(200):
        g = alpha * p * r ** (p - 1.0) + mu * r - t
        hi = np.where(g > 0.0, r, hi)
        lo = np.where(g > 0.0, lo, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            dg = alpha * p * (p - 1.0) * r ** (p - 2.0) + mu
            rn = r - g / dg
        bad = ~((lo < rn) & (rn < hi))
        rn = np.where(bad, 0.5 * (lo + hi), rn)
        done = np.abs(rn - r) <= 1e-15 * np.maximum(1.0, r)
        r = rn
        if done.all():
            break
    return r


def envelope_radial_np(r, prm):
    r = np.asarray(r, dtype=float)
    a1, p1, a2, p2, k, s, r1, r2, deg = prm
    if deg:
        return a2 * r**p2
    return np.where(
        r <= r1, a2 * r**p2, np.where(r >= r2, a1 * r**p1 + k, a2 * r1**p2 + s * (r - r1))
    )


def radial_dual_np(t, prm, mu, policy):
    t = np.asarray(t, dtype=float)
    a1, p1, a2, p2, k, s, r1, r2, deg = prm
    if mu == 0.0:
        v2, g2 = _power_conj_np(t, a2, p2)
        if deg:
            return v2, g2
        v1, g1 = _power_conj_np(t, a1, p1)
        v1 = v1 - k
        if policy == POLICY_H1:
            g_tie = g1
        elif policy == POLICY_AVERAGE:
            g_tie = 0.5 * (g1 + g2)
        else:
            g_tie = g2
        val = np.maximum(v1, v2)
        r = np.where(v2 > v1, g2, np.where(v1 > v2, g1, g_tie))
        return val, r
    if deg:
        r = _solve_branch_np(t, a2, p2, mu, 0.0, np.inf)
    else:
        t_lo = a2 * p2 * r1 ** (p2 - 1.0) + mu * r1
        t_hi = a1 * p1 * r2 ** (p1 - 1.0) + mu * r2
        low = _solve_branch_np(t, a2, p2, mu, 0.0, r1)
        high = _solve_branch_np(t, a1, p1, mu, r2, np.inf)
        mid = np.clip((t - s) / mu, r1, r2)
        r = np.where(t <= t_lo, low, np.where(t >= t_hi, high, mid))
    val = t * r - envelope_radial_np(r, prm) - 0.5 * mu * r * r
    return np.where(t > 0.0, val, 0.0), np.where(t > 0.0, r, 0.0)


# ---------------------------------------------------------------------------
# Q1 cell gradient, fused dual evaluation and the adjoint
# ---------------------------------------------------------------------------

@njit
def _dual_terms_nb(u, hx, hy, prm, mu, policy):
    nx = u.shape[0] - 1
    ny = u.shape[1] - 1
    vals = np.empty((nx, ny))
    sx = np.empty((nx, ny))
    sy = np.empty((nx, ny))
    cx = 0.5 / hx
    cy = 0.5 / hy
    for i in range(nx):
        for j in range(ny):
            u00 = u[i, j]
            u10 = u[i + 1, j]
            u01 = u[i, j + 1]
            u11 = u[i + 1, j + 1]
            gx = (u10 + u11 - u00 - u01) * cx
            gy = (u01 + u11 - u00 - u10) * cy
            t = math.sqrt(gx * gx + gy * gy)
            v, r = radial_dual(t, prm, mu, policy)
            vals[i, j] = v
            if t > 0.0:
                sc = r / t
                sx[i, j] = sc * gx
                sy[i, j] = sc * gy
            else:
                sx[i, j] = 0.0
                sy[i, j] = 0.0
    return vals, sx, sy


def cell_gradient_np(u, hx, hy):
    gx = (u[1:, :-1] + u[1:, 1:] - u[:-1, :-1] - u[:-1, 1:]) * (0.5 / hx)
    gy = (u[:-1, 1:] + u[1:, 1:] - u[:-1, :-1] - u[1:, :-1]) * (0.5 / hy)
    return gx, gy


def _dual_terms_np(u, hx, hy, prm, mu, policy):
    gx, gy = cell_gradient_np(u, hx, hy)
    t = np.hypot(gx, gy)
    vals, r = radial_dual_np(t, prm, mu, policy)
    with np.errstate(divide="ignore", invalid="ignore"):
        sc = np.where(t > 0.0, r / t, 0.0)
    return vals, sc * gx, sc * gy


def dual_terms(u, hx, hy, prm, mu=0.0, policy=POLICY_H2):
    """Per-cell dual cost ``H*(grad u)`` and flux ``grad H*(grad u)``."""
    u = np.ascontiguousarray(u, dtype=float)
    prm = np.ascontiguousarray(prm, dtype=float)
    if _accel.USE_NUMBA:
        return _dual_terms_nb(u, float(hx), float(hy), prm, float(mu), int(policy))
    return _dual_terms_np(u, hx, hy, prm, mu, policy)


@njit
def _adjoint_nb(wx, wy, hx, hy):
    nx, ny = wx.shape
    out = np.zeros((nx + 1, ny + 1))
    cx = 0.5 / hx
    cy = 0.5 / hy
    for i in range(nx):
        for j in range(ny):
            ax = wx[i, j] * cx
            ay = wy[i, j] * cy
            out[i, j] += -ax - ay
            out[i + 1, j] += ax - ay
            out[i, j + 1] += -ax + ay
            out[i + 1, j + 1] += ax + ay
    return out


def _adjoint_np(wx, wy, hx, hy):
    nx, ny = wx.shape
    out = np.zeros((nx + 1, ny + 1))
    ax = wx * (0.5 / hx)
    ay = wy * (0.5 / hy)
    out[:-1, :-1] += -ax - ay
    out[1:, :-1] += ax - ay
    out[:-1, 1:] += -ax + ay
    out[1:, 1:] += ax + ay
    return out


def cell_gradient_adjoint(wx, wy, hx, hy):
    """Transpose of the cell-gradient map (no area weighting)."""
    wx = np.ascontiguousarray(wx, dtype=float)
    wy = np.ascontiguousarray(wy, dtype=float)
    if _accel.USE_NUMBA:
        return _adjoint_nb(wx, wy, float(hx), float(hy))
    return _adjoint_np(wx, wy, hx, hy)


# ---------------------------------------------------------------------------
# 1-D lower convex envelope (Andrew's monotone chain, lower part)
# ---------------------------------------------------------------------------

@njit
def lower_hull_indices(x, y):
    """Indices of the vertices of the lower convex hull of ``(x, y)``.

    ``x`` must be strictly increasing."""
    n = x.shape[0]
    hull = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        while m >= 2:
            o = hull[m - 2]
            a = hull[m - 1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0.0:
                m -= 1
            else:
                break
        hull[m] = i
        m += 1
    return hull[:m].copy()


# ---------------------------------------------------------------------------
# exact Euclidean distance transform (Felzenszwalb-Huttenlocher)
# ---------------------------------------------------------------------------

@njit
def _dt1d(f, d, v, z):
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -math.inf
    z[1] = math.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit
def _edt_sq_nb(mask):
    m, n = mask.shape
    size = max(m, n)
    f = np.empty(size)
    d = np.empty(size)
    v = np.empty(size, dtype=np.int64)
    z = np.empty(size + 1)
    out = np.empty((m, n))
    for j in range(n):
        for i in range(m):
            f[i] = 0.0 if mask[i, j] else _BIG
        _dt1d(f[:m], d[:m], v, z)
        for i in range(m):
            out[i, j] = d[i]
    for i in range(m):
        for j in range(n):
            f[j] = out[i, j]
        _dt1d(f[:n], d[:n], v, z)
        for j in range(n):
            out[i, j] = d[j]
    return out


def distance_to_set(mask, h):
    """Euclidean distance from every pixel centre to the nearest member pixel centre."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if not mask.any():
        return np.full(mask.shape, np.inf)
    if _accel.USE_NUMBA:
        return np.sqrt(_edt_sq_nb(mask)) * h
    return ndimage.distance_transform_edt(~mask) * h


# ---------------------------------------------------------------------------
# marching-squares isoline length
# ---------------------------------------------------------------------------

@njit
def _frac(p, q, level):
    return (level - p) / (q - p)


@njit
def _contour_length_nb(F, level, hx, hy):
    m, n = F.shape
    total = 0.0
    xs = np.empty(4)
    ys = np.empty(4)
    for i in range(m - 1):
        row = 0.0
        for j in range(n - 1):
            a = F[i, j]
            b = F[i + 1, j]
            c = F[i + 1, j + 1]
            d = F[i, j + 1]
            ia = a >= level
            ib = b >= level
            ic = c >= level
            idd = d >= level
            ncross = 0
            # edges: 0 a->b (y=0), 1 b->c (x=1), 2 d->c (y=1), 3 a->d (x=0)
            if ia != ib:
                xs[0] = _frac(a, b, level)
                ys[0] = 0.0
                ncross += 1
            if ib != ic:
                xs[1] = 1.0
                ys[1] = _frac(b, c, level)
                ncross += 1
            if idd != ic:
                xs[2] = _frac(d, c, level)
                ys[2] = 1.0
                ncross += 1
            if ia != idd:
                xs[3] = 0.0
                ys[3] = _frac(a, d, level)
                ncross += 1
            if ncross == 2:
                e0 = -1
                e1 = -1
                if ia != ib:
                    e0 = 0
                if ib != ic:
                    if e0 < 0:
                        e0 = 1
                    else:
                        e1 = 1
                if idd != ic:
                    if e0 < 0:
                        e0 = 2
                    else:
                        e1 = 2
                if ia != idd:
                    e1 = 3
                row += math.hypot((xs[e0] - xs[e1]) * hx, (ys[e0] - ys[e1]) * hy)
            elif ncross == 4:
                centre_high = 0.25 * (a + b + c + d) >= level
                if centre_high == ia:
                    row += math.hypot((xs[0] - xs[1]) * hx, (ys[0] - ys[1]) * hy)
                    row += math.hypot((xs[2] - xs[3]) * hx, (ys[2] - ys[3]) * hy)
                else:
                    row += math.hypot((xs[0] - xs[3]) * hx, (ys[0] - ys[3]) * hy)
                    row += math.hypot((xs[1] - xs[2]) * hx, (ys[1] - ys[2]) * hy)
        total += row
    return total


def _contour_length_np(F, level, hx, hy):
    a = F[:-1, :-1]
    b = F[1:, :-1]
    c = F[1:, 1:]
    d = F[:-1, 1:]
    A, B, C, D = a >= level, b >= level, c >= level, d >= level
    cross = np.stack([A != B, B != C, D != C, A != D])

    def frac(p, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(q != p, (level - p) / (q - p), 0.0)

    zero = np.zeros_like(a)
    one = np.ones_like(a)
    X = np.stack([frac(a, b), one, frac(d, c), zero])
    Y = np.stack([zero, frac(b, c), one, frac(a, d)])
    ncross = cross.sum(axis=0)

    def seg(e, f):
        return np.hypot((X[e] - X[f]) * hx, (Y[e] - Y[f]) * hy)

    order = np.argsort(~cross, axis=0, kind="stable")
    x1 = np.take_along_axis(X, order[:1], 0)[0]
    y1 = np.take_along_axis(Y, order[:1], 0)[0]
    x2 = np.take_along_axis(X, order[1:2], 0)[0]
    y2 = np.take_along_axis(Y, order[1:2], 0)[0]
    single = np.where(ncross == 2, np.hypot((x1 - x2) * hx, (y1 - y2) * hy), 0.0)
    centre_high = 0.25 * (a + b + c + d) >= level
    saddle = np.where(centre_high == A, seg(0, 1) + seg(2, 3), seg(0, 3) + seg(1, 2))
    per_cell = np.where(ncross == 4, saddle, single)
    return float(per_cell.sum(axis=1).sum())


def contour_length(F, level, hx, hy):
    """Total length of the ``level`` isoline of a sampled field (sample spacing hx, hy)."""
    F = np.ascontiguousarray(F, dtype=float)
    if _accel.USE_NUMBA:
        return float(_contour_length_nb(F, float(level), float(hx), float(hy)))
    return _contour_length_np(F, level, hx, hy)
