"""Level sets of the mixing density and the curvature test on their boundary.

For a region ``C`` bounded by a level line of ``theta``, the boundary of an
optimal set for the perimeter-penalised problem satisfies

    H2(s_int) - H1(s_int)  >=  k_per * curvature  >=  H2(s_ext) - H1(s_ext)

with ``s_int``/``s_ext`` the flux just inside/outside ``C``.  On a relaxed
(diffuse) density this is only a diagnostic: the one-sided traces are
modelled by probing the flux a fixed offset along the normal.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .congestion import EnvelopePair
from .errors import DegenerateContour, NoContour, ProbeOutOfDomain
from .grid import ScalarField, VectorField

PROBE_OFFSET_CELLS = 1.5
PROBE_NOTE = "one-sided traces modelled by probes at a fixed normal offset across a diffuse interface"


@dataclass
class Contour:
    """Closed polyline (first vertex repeated last), oriented with ``C`` on the left."""

    vertices: np.ndarray
    curvature: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be an (n, 2) array")
        if len(v) < 2 or not np.allclose(v[0], v[-1]):
            v = np.vstack([v, v[:1]])
        self.vertices = v

    @property
    def n_vertices(self) -> int:
        return len(self.vertices) - 1

    @property
    def arclength(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.vertices, axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    def reversed(self) -> "Contour":
        # reversing the closed polyline maps vertex i to vertex -i (mod n)
        curv = None if self.curvature is None else -np.roll(self.curvature[::-1], 1)
        return Contour(self.vertices[::-1].copy(), curv)

    def normals(self) -> np.ndarray:
        """Unit left normals at the vertices (central tangent estimate)."""
        p = self.vertices[:-1]
        t = np.roll(p, -1, axis=0) - np.roll(p, 1, axis=0)
        t /= np.maximum(np.hypot(t[:, 0], t[:, 1]), 1e-300)[:, None]
        return np.column_stack([-t[:, 1], t[:, 0]])


def _sample_cells(values, grid, pts):
    """Bilinear interpolation of a cell-centred array at physical points."""
    ci = pts[:, 0] / grid.hx - 0.5
    cj = pts[:, 1] / grid.hy - 0.5
    return ndimage.map_coordinates(values, [ci, cj], order=1, mode="nearest")


def extract_contour(theta: ScalarField, level: float = 0.5) -> list[Contour]:
    """Closed isolines ``theta = level`` (one per boundary component of ``{theta >= level}``)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    g = theta.grid
    vals = theta.values
    if not ((vals >= level).any() and (vals < level).any()):
        raise NoContour(f"theta never crosses {level}")
    pad = np.pad(vals, 1, constant_values=min(float(vals.min()), level) - 1.0)
    # cell-centred samples: padded index p sits at coordinate (p - 1 + 0.5) h
    xoff = np.array([g.hx, g.hy])
    out = []
    for c in measure.find_contours(pad, level):
        pts = (c - 0.5) * xoff
        if len(pts) < 4:
            continue
        cont = Contour(pts)
        # put the region theta >= level on the left
        mid = 0.5 * (cont.vertices[:-1] + cont.vertices[1:])
        seg = np.diff(cont.vertices, axis=0)
        nrm = np.column_stack([-seg[:, 1], seg[:, 0]])
        nrm /= np.maximum(np.hypot(nrm[:, 0], nrm[:, 1]), 1e-300)[:, None]
        eps = 0.25 * min(g.hx, g.hy)
        left = _sample_padded(pad, g, mid + eps * nrm)
        right = _sample_padded(pad, g, mid - eps * nrm)
        if np.mean(left - right) < 0:
            cont = cont.reversed()
        out.append(cont)
    if not out:
        raise NoContour(f"no closed component at level {level}")
    return out


def _sample_padded(pad, grid, pts):
    ci = pts[:, 0] / grid.hx + 0.5
    cj = pts[:, 1] / grid.hy + 0.5
    return ndimage.map_coordinates(pad, [ci, cj], order=1, mode="nearest")


def _fit_curvature(xi, eta):
    # least squares for eta = kappa (xi^2 + eta^2) / 2 + beta xi + gamma
    A = np.column_stack([0.5 * (xi * xi + eta * eta), xi, np.ones_like(xi)])
    (kappa, beta, gamma), *_ = np.linalg.lstsq(A, eta, rcond=None)
    disc = 1.0 + beta * beta - 2.0 * gamma * kappa
    if disc <= 0:
        return kappa
    return kappa / math.sqrt(disc)


def curvature(c: Contour, smoothing_window: float | None = None) -> np.ndarray:
    """Signed curvature at each vertex from a circle fit over an arc-length window.

    Positive where ``C`` (on the left) is locally convex.  The default window
    spans ten mean edge lengths.  The result is also stored on ``c``.
    """
    n = c.n_vertices
    if n < 8:
        raise DegenerateContour(f"contour has {n} vertices, need at least 8")
    s = c.arclength
    L = s[-1]
    if not L > 0:
        raise DegenerateContour("contour has zero length")
    if smoothing_window is None:
        smoothing_window = 10.0 * L / n
    half = 0.5 * smoothing_window
    p = c.vertices[:-1]
    sv = s[:-1]
    nrm = c.normals()
    tan = np.column_stack([nrm[:, 1], -nrm[:, 0]])
    out = np.empty(n)
    for i in range(n):
        ds = (sv - sv[i] + 0.5 * L) % L - 0.5 * L
        sel = np.abs(ds) <= half
        if sel.sum() < 5:
            sel = np.argsort(np.abs(ds))[:5]
        d = p[sel] - p[i]
        xi = d @ tan[i]
        eta = d @ nrm[i]
        out[i] = _fit_curvature(xi, eta)
    c.curvature = out
    return out


@dataclass
class CurvatureReport:
    inner_gap: np.ndarray
    k_curvature: np.ndarray
    outer_gap: np.ndarray
    passed: np.ndarray
    evaluated: int
    skipped: int
    violation_fraction: float
    negative_curvature_fraction: float
    tolerance: float
    probe_offset: float
    note: str = PROBE_NOTE
    curvature_summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "inner_gap": self.inner_gap.tolist(),
            "k_curvature": self.k_curvature.tolist(),
            "outer_gap": self.outer_gap.tolist(),
            "passed": self.passed.astype(bool).tolist(),
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "violation_fraction": self.violation_fraction,
            "negative_curvature_fraction": self.negative_curvature_fraction,
            "tolerance": self.tolerance,
            "probe_offset": self.probe_offset,
            "note": self.note,
            "curvature_summary": self.curvature_summary,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def check_optimality(
    contour: Contour,
    sigma: VectorField,
    e: EnvelopePair,
    k_perimeter: float,
    *,
    tolerance: float = 1e-6,
    probe_offset: float | None = None,
) -> CurvatureReport:
    """Evaluate the two-sided curvature inequality at every vertex.

    Probes sit ``probe_offset`` (default 1.5 cell widths) inside and outside
    along the normal; vertices whose probes leave the domain are skipped.
    """
    g = sigma.grid
    if contour.curvature is None:
        curvature(contour)
    off = PROBE_OFFSET_CELLS * min(g.hx, g.hy) if probe_offset is None else probe_offset
    p = contour.vertices[:-1]
    nrm = contour.normals()
    inner = p + off * nrm
    outer = p - off * nrm

    def inside(q):
        return (q[:, 0] >= 0) & (q[:, 0] <= g.lx) & (q[:, 1] >= 0) & (q[:, 1] <= g.ly)

    ok = inside(inner) & inside(outer)
    if not ok.any():
        raise ProbeOutOfDomain("every probe pair leaves the domain")

    def gap(q):
        sx = _sample_cells(sigma.values[..., 0], g, q)
        sy = _sample_cells(sigma.values[..., 1], g, q)
        r = np.hypot(sx, sy)
        return e.h2.radial(r) - e.h1.radial(r)

    g_in = gap(inner[ok])
    g_out = gap(outer[ok])
    kc = k_perimeter * contour.curvature[ok]
    passed = (g_in + tolerance >= kc) & (kc >= g_out - tolerance)
    curv = contour.curvature
    return CurvatureReport(
        inner_gap=g_in,
        k_curvature=kc,
        outer_gap=g_out,
        passed=passed,
        evaluated=int(ok.sum()),
        skipped=int((~ok).sum()),
        violation_fraction=float(1.0 - passed.mean()),
        negative_curvature_fraction=float(np.mean(curv < 0)),
        tolerance=tolerance,
        probe_offset=off,
        curvature_summary={
            "min": float(curv.min()),
            "max": float(curv.max()),
            "median": float(np.median(curv)),
        },
    )


def write_contours_csv(contours, path) -> None:
    """Polylines as rows ``contour, vertex, x, y, curvature``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["contour", "vertex", "x", "y", "curvature"])
        for ci, c in enumerate(contours):
            curv = c.curvature
            for vi, (x, y) in enumerate(c.vertices[:-1]):
                kv = "" if curv is None else repr(float(curv[vi]))
                w.writerow([ci, vi, repr(float(x)), repr(float(y)), kv])
