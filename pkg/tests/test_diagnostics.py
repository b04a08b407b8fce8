import json
import math

import numpy as np
import pytest

from congestopt import Grid, ScalarField, VectorField, quadratic_pair
from congestopt.diagnostics import Contour, check_optimality, curvature, extract_contour, write_contours_csv
from congestopt.errors import DegenerateContour, NoContour, ProbeOutOfDomain

E = quadratic_pair(1.0, 4.0, 0.06)


def ramp_disc(n, c=(0.5, 0.5), R=0.2):
    """theta ramps from 1 to 0 across two cells around the circle |x - c| = R."""
    g = Grid(n, n)
    X, Y = g.cell_centers()
    rho = np.hypot(X - c[0], Y - c[1])
    return ScalarField(g, np.clip(0.5 + (R - rho) / (2 * g.hx), 0, 1), "cell")


def rounded_rect(n, lo=(0.2, 0.3), hi=(0.8, 0.7), r=0.05):
    g = Grid(n, n)
    X, Y = g.cell_centers()
    cx, cy = (lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2
    qx = np.abs(X - cx) - ((hi[0] - lo[0]) / 2 - r)
    qy = np.abs(Y - cy) - ((hi[1] - lo[1]) / 2 - r)
    sd = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0)) + np.minimum(np.maximum(qx, qy), 0) - r
    return ScalarField(g, np.clip(0.5 - sd / (2 * g.hx), 0, 1), "cell")


def radial_sigma(grid, inner, outer, c=(0.5, 0.5), R=0.2):
    """Radial flux of magnitude inner(x, y) inside the circle and outer(x, y) outside."""
    X, Y = grid.cell_centers()
    dx, dy = X - c[0], Y - c[1]
    rho = np.maximum(np.hypot(dx, dy), 1e-12)
    mag = np.where(rho < R, inner(X, Y), outer(X, Y))
    return VectorField(grid, np.stack([mag * dx / rho, mag * dy / rho], axis=-1))


# extraction ------------------------------------------------------------------

def test_circle_contour_length():
    (c,) = extract_contour(ramp_disc(200))
    assert c.length == pytest.approx(2 * math.pi * 0.2, rel=0.02)
    assert c.signed_area > 0  # region on the left means counter-clockwise
    assert np.allclose(c.vertices[0], c.vertices[-1])


def test_contour_length_converges():
    err = [abs(extract_contour(ramp_disc(n))[0].length - 2 * math.pi * 0.2) for n in (50, 200)]
    assert err[1] < err[0]


def test_no_contour():
    g = Grid(20, 20)
    with pytest.raises(NoContour):
        extract_contour(ScalarField(g, np.zeros(g.cell_shape), "cell"))
    with pytest.raises(ValueError):
        extract_contour(ramp_disc(40), level=1.0)


def test_two_bumps_two_components():
    a = ramp_disc(120, (0.3, 0.3), 0.1).values
    b = ramp_disc(120, (0.7, 0.7), 0.1).values
    cs = extract_contour(ScalarField(Grid(120, 120), np.maximum(a, b), "cell"))
    assert len(cs) == 2
    assert all(c.signed_area > 0 for c in cs)
    assert all(c.length == pytest.approx(2 * math.pi * 0.1, rel=0.02) for c in cs)


def test_hole_is_oriented_with_region_on_left():
    ring = 1.0 - ramp_disc(100, R=0.2).values
    ring = np.minimum(ring, ramp_disc(100, R=0.4).values)
    cs = extract_contour(ScalarField(Grid(100, 100), ring, "cell"))
    areas = sorted(c.signed_area for c in cs)
    assert areas[0] < 0 < areas[1]


def test_region_touching_edge_closes_on_boundary():
    g = Grid(60, 60)
    X, _ = g.cell_centers()
    cs = extract_contour(ScalarField(g, (X < 0.5).astype(float), "cell"))
    assert len(cs) == 1 and cs[0].signed_area > 0


# curvature -------------------------------------------------------------------

@pytest.mark.parametrize("n,R", [(100, 0.1), (100, 0.2), (100, 0.25), (200, 0.2)])
def test_curvature_on_circles(n, R):
    (c,) = extract_contour(ramp_disc(n, R=R))
    k = curvature(c)
    assert np.all(np.abs(k * R - 1.0) <= 0.1)
    assert c.curvature is k


def test_curvature_sign_flips_with_orientation():
    (c,) = extract_contour(ramp_disc(100))
    k = curvature(c)
    r = c.reversed()
    carried = r.curvature.copy()
    kr = curvature(r)
    assert np.all(kr < 0)
    assert np.allclose(kr, -k[-np.arange(len(k))], rtol=1e-6, atol=1e-9)
    assert np.allclose(carried, kr, rtol=1e-6, atol=1e-9)


def test_rounded_rectangle_flat_sides():
    (c,) = extract_contour(rounded_rect(200))
    k = curvature(c)
    x, y = c.vertices[:-1].T
    flat = ((np.abs(x - 0.5) < 0.2) & ((np.abs(y - 0.3) < 0.01) | (np.abs(y - 0.7) < 0.01))) | (
        (np.abs(y - 0.5) < 0.1) & ((np.abs(x - 0.2) < 0.01) | (np.abs(x - 0.8) < 0.01))
    )
    assert flat.sum() > 50
    assert np.max(np.abs(k[flat])) < 0.5  # corner curvature is 20
    assert np.median(k[~flat]) > 0


def test_degenerate_contour():
    t = np.linspace(0, 2 * np.pi, 6)[:-1]
    with pytest.raises(DegenerateContour):
        curvature(Contour(np.column_stack([np.cos(t), np.sin(t)])))


# optimality check ----------------------------------------------------------------

K_PER = 0.01  # k * curvature is about 0.05 on the R = 0.2 circle


def circle_setup(n=100):
    theta = ramp_disc(n)
    (c,) = extract_contour(theta)
    curvature(c)
    return theta.grid, c


def test_fixture_passing_everywhere():
    g, c = circle_setup()
    # gaps are 3 s^2: 0.12 inside, 0.0075 outside
    sig = radial_sigma(g, lambda x, y: 0.2 + 0 * x, lambda x, y: 0.05 + 0 * x)
    rep = check_optimality(c, sig, E, K_PER)
    assert rep.violation_fraction == 0.0 and rep.skipped == 0
    assert rep.negative_curvature_fraction == 0.0
    assert np.all(rep.inner_gap >= rep.k_curvature) and np.all(rep.k_curvature >= rep.outer_gap)


def test_fixture_violating_outer_bound_on_an_arc():
    g, c = circle_setup()
    sig = radial_sigma(g, lambda x, y: 0.2 + 0 * x, lambda x, y: np.where(y > 0.5, 0.2, 0.05))
    rep = check_optimality(c, sig, E, K_PER)
    y = c.vertices[:-1, 1]
    clear = np.abs(y - 0.5) > 0.03  # away from the seam of the fixture
    assert np.all(~rep.passed[clear & (y > 0.5)])
    assert np.all(rep.passed[clear & (y < 0.5)])
    assert 0.3 < rep.violation_fraction < 0.7


def test_fixture_violating_everywhere():
    g, c = circle_setup()
    sig = radial_sigma(g, lambda x, y: 0.2 + 0 * x, lambda x, y: 0.2 + 0 * x)
    assert check_optimality(c, sig, E, K_PER).violation_fraction == 1.0


def test_probes_leaving_domain():
    g, c = circle_setup()
    sig = radial_sigma(g, lambda x, y: 0.2 + 0 * x, lambda x, y: 0.05 + 0 * x)
    rep = check_optimality(c, sig, E, K_PER, probe_offset=0.35)
    assert rep.skipped > 0 and rep.evaluated > 0
    assert rep.evaluated + rep.skipped == c.n_vertices
    assert len(rep.passed) == rep.evaluated
    with pytest.raises(ProbeOutOfDomain):
        check_optimality(c, sig, E, K_PER, probe_offset=2.0)


def test_report_serialisation(tmp_path):
    g, c = circle_setup()
    sig = radial_sigma(g, lambda x, y: 0.2 + 0 * x, lambda x, y: 0.05 + 0 * x)
    rep = check_optimality(c, sig, E, K_PER)
    d = json.loads(rep.to_json())
    assert d["violation_fraction"] == 0.0
    assert d["probe_offset"] == pytest.approx(1.5 / 100)
    assert "note" in d and len(d["passed"]) == rep.evaluated
    p = tmp_path / "c.csv"
    write_contours_csv([c], p)
    rows = p.read_text().splitlines()
    assert rows[0] == "contour,vertex,x,y,curvature"
    assert len(rows) == c.n_vertices + 1
