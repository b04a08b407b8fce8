"""Raster calculus of r-enlargements ``E_r = {x : dist(x, E) < r}``.

Sets are boolean pixel masks on a square raster of pixel size ``h``; pixel
``[i, j]`` has its centre at ``((i + 0.5) h, (j + 0.5) h)``.  Distances are
measured between pixel centres with an exact Euclidean distance transform.

Perimeters come from marching squares.  A set produced by :func:`dilate`
remembers its distance field, and its boundary is taken as the ``r`` level
line of that field; any other set is blurred by one bilinear (tent) step and
contoured at level 1/2.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import fieldio, kernels
from .errors import BoundaryContact, OutOfBounds

MARGIN_PIXELS = 4


@dataclass(frozen=True, eq=False)
class RasterSet:
    mask: np.ndarray
    h: float
    distance: np.ndarray | None = None  # distance field of the generator, for dilated sets
    radius: float | None = None

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        if not self.h > 0:
            raise ValueError("pixel size must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def shape(self):
        return self.mask.shape

    @classmethod
    def empty(cls, n: int, h: float | None = None) -> "RasterSet":
        return cls(np.zeros((n, n), dtype=bool), 1.0 / n if h is None else h)

    def pixel_centers(self):
        m, n = self.shape
        x = (np.arange(m) + 0.5) * self.h
        y = (np.arange(n) + 0.5) * self.h
        return np.meshgrid(x, y, indexing="ij")

    def union(self, other: "RasterSet") -> "RasterSet":
        if other.shape != self.shape or other.h != self.h:
            raise ValueError("rasters differ")
        return RasterSet(self.mask | other.mask, self.h)

    def issubset(self, other: "RasterSet") -> bool:
        return bool(np.all(~self.mask | other.mask))


def point(n: int, center=(0.5, 0.5)) -> RasterSet:
    """Single pixel containing ``center`` on an ``n x n`` raster of the unit square."""
    m = np.zeros((n, n), dtype=bool)
    i = min(int(center[0] * n), n - 1)
    j = min(int(center[1] * n), n - 1)
    m[i, j] = True
    return RasterSet(m, 1.0 / n)


def disc(n: int, center, radius: float) -> RasterSet:
    s = RasterSet.empty(n)
    X, Y = s.pixel_centers()
    return RasterSet((X - center[0]) ** 2 + (Y - center[1]) ** 2 < radius**2, s.h)


def segment(n: int, p, q, thickness: float | None = None) -> RasterSet:
    """Pixels whose centre lies within ``thickness/2`` of the segment ``pq``
    (default thickness one pixel)."""
    s = RasterSet.empty(n)
    X, Y = s.pixel_centers()
    p, q = np.asarray(p, float), np.asarray(q, float)
    d = q - p
    L2 = float(d @ d)
    t = np.clip(((X - p[0]) * d[0] + (Y - p[1]) * d[1]) / L2, 0.0, 1.0) if L2 > 0 else 0.0
    half = 0.5 * (s.h if thickness is None else thickness)
    return RasterSet(np.hypot(X - p[0] - t * d[0], Y - p[1] - t * d[1]) <= half, s.h)


def distance_field(E: RasterSet) -> np.ndarray:
    return kernels.distance_to_set(E.mask, E.h)


def _check_margin(mask, what, exc):
    b = MARGIN_PIXELS
    if mask[:b].any() or mask[-b:].any() or mask[:, :b].any() or mask[:, -b:].any():
        raise exc(f"{what} comes within {b} pixels of the raster boundary")


def dilate(E: RasterSet, r: float) -> RasterSet:
    """``{x : dist(x, E) < r}`` on the raster; raises OutOfBounds if the result
    would reach the boundary margin."""
    if not r > 0:
        raise ValueError("dilation radius must be positive")
    D = distance_field(E)
    out = D < r
    _check_margin(out, f"E_r with r={r:g}", OutOfBounds)
    return RasterSet(out, E.h, D, float(r))


def area(E: RasterSet) -> float:
    return float(np.count_nonzero(E.mask)) * E.h * E.h


def smoothed_indicator(mask) -> np.ndarray:
    """Indicator padded by two pixels and blurred by a separable [1, 2, 1]/4 tent."""
    F = np.pad(np.asarray(mask, dtype=float), 2)
    w = np.array([0.25, 0.5, 0.25])
    F = ndimage.correlate1d(F, w, axis=0, mode="constant")
    return ndimage.correlate1d(F, w, axis=1, mode="constant")


def perimeter(E: RasterSet) -> float:
    if not E.mask.any():
        raise ValueError("perimeter of an empty set")
    m = E.mask
    if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
        raise BoundaryContact("set touches the raster boundary")
    if E.distance is not None:
        F = np.pad(-E.distance, 1, constant_values=-np.inf)
        F = np.where(np.isfinite(F), F, -1e300)
        return kernels.contour_length(F, -E.radius, E.h, E.h)
    return kernels.contour_length(smoothed_indicator(m), 0.5, E.h, E.h)


class DilationMargin(NamedTuple):
    r: float
    lhs: float  # per(E_r)
    rhs: float  # (2 / r) |E_r|
    slack: float  # (rhs - lhs) / rhs


def check_dilation_inequality(E: RasterSet, r: float) -> DilationMargin:
    Er = dilate(E, r)
    lhs = perimeter(Er)
    rhs = 2.0 / r * area(Er)
    return DilationMargin(float(r), lhs, rhs, (rhs - lhs) / rhs)


class CoareaCheck(NamedTuple):
    r: float
    delta: float
    area_increment: float  # |E_{r+delta}| - |E_r|
    left: float  # delta * per(E_r)
    midpoint: float  # delta * per(E_{r + delta/2})
    rel_error: float  # increment / left - 1
    rel_error_midpoint: float


def coarea_check(E: RasterSet, r: float, delta: float, D=None) -> CoareaCheck:
    """Compare the area gained between radii ``r`` and ``r + delta`` with the
    perimeter at ``r`` (and at the midpoint radius)."""
    D = distance_field(E) if D is None else D
    outer = D < r + delta
    _check_margin(outer, f"E_r with r={r + delta:g}", OutOfBounds)
    inc = float(np.count_nonzero(outer & (D >= r))) * E.h * E.h
    left = delta * perimeter(RasterSet(D < r, E.h, D, r))
    mid = delta * perimeter(RasterSet(D < r + 0.5 * delta, E.h, D, r + 0.5 * delta))
    return CoareaCheck(r, delta, inc, left, mid, inc / left - 1.0, inc / mid - 1.0)


def random_union(seed: int, n: int = 512, max_parts: int = 5) -> RasterSet:
    """Union of 1..max_parts discs (radius 0.02-0.08) and one-pixel segments,
    all inside ``[0.3, 0.7]^2`` plus the disc radius."""
    rng = np.random.default_rng(seed)
    E = RasterSet.empty(n)
    for _ in range(int(rng.integers(1, max_parts + 1))):
        if rng.random() < 0.5:
            c = rng.uniform(0.3, 0.7, 2)
            part = disc(n, c, rng.uniform(0.02, 0.08))
            if not part.mask.any():
                part = point(n, c)
        else:
            part = segment(n, rng.uniform(0.3, 0.7, 2), rng.uniform(0.3, 0.7, 2))
        E = E.union(part)
    return E


class SweepRow(NamedTuple):
    seed: int
    r: float
    lhs: float
    rhs: float
    slack: float
    coarea_error: float
    coarea_error_midpoint: float


def sweep(seeds, radii=(0.02, 0.05, 0.1), n: int = 512, delta_pixels: float = 2.0) -> list[SweepRow]:
    rows = []
    for seed in seeds:
        E = random_union(int(seed), n)
        D = distance_field(E)
        for r in radii:
            Er = RasterSet(D < r, E.h, D, float(r))
            _check_margin(Er.mask, f"E_r with r={r:g}", OutOfBounds)
            lhs = perimeter(Er)
            rhs = 2.0 / r * area(Er)
            co = coarea_check(E, r, delta_pixels * E.h, D)
            rows.append(SweepRow(int(seed), float(r), lhs, rhs, (rhs - lhs) / rhs, co.rel_error, co.rel_error_midpoint))
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "r", "lhs", "rhs", "slack"])
        for row in rows:
            w.writerow([row.seed, repr(row.r), repr(row.lhs), repr(row.rhs), repr(row.slack)])


def write_pgm(E: RasterSet, path) -> None:
    """Members 255, others 0."""
    fieldio.write_pgm_u8(np.where(E.mask, 255, 0), path)


def read_pgm(path, h: float | None = None) -> RasterSet:
    px = fieldio.read_pgm(path)
    return RasterSet(px >= 128, 1.0 / px.shape[0] if h is None else h)
