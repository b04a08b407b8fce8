import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from congestopt import dilation as dl
from congestopt.errors import BoundaryContact, OutOfBounds
from oracles import brute_distance


def square(n, lo, hi):
    s = dl.RasterSet.empty(n)
    X, Y = s.pixel_centers()
    return dl.RasterSet((X > lo) & (X < hi) & (Y > lo) & (Y < hi), s.h)


# distance transform --------------------------------------------------------------

@given(st.integers(0, 10_000))
def test_distance_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((24, 19)) < rng.uniform(0.01, 0.2)
    mask[rng.integers(24), rng.integers(19)] = True
    d = dl.distance_field(dl.RasterSet(mask, 0.1))
    assert np.allclose(d, brute_distance(mask, 0.1), atol=1e-12)


def test_point_dilation_is_discrete_disc():
    n = 128
    E = dl.point(n)
    Er = dl.dilate(E, 10 * E.h)
    X, Y = E.pixel_centers()
    c = ((64 + 0.5) / n, (64 + 0.5) / n)
    assert np.array_equal(Er.mask, np.hypot(X - c[0], Y - c[1]) < 10 * E.h - 1e-12)


def test_two_points_merge():
    n = 64
    m = np.zeros((n, n), bool)
    m[30, 32] = m[35, 32] = True
    E = dl.RasterSet(m, 1.0 / n)
    Er = dl.dilate(E, 3 * E.h)
    assert np.array_equal(Er.mask, brute_distance(m, E.h) < 3 * E.h)
    from scipy import ndimage

    assert ndimage.label(Er.mask)[1] == 1


@given(st.integers(0, 10_000), st.floats(0.005, 0.05), st.floats(0.0, 0.05))
def test_dilation_monotone(seed, r, extra):
    E = dl.random_union(seed, 128, max_parts=3)
    A = dl.dilate(E, r)
    B = dl.dilate(E, r + extra)
    assert E.issubset(A) and A.issubset(B)


@given(st.integers(0, 10_000), st.floats(0.01, 0.04), st.floats(0.01, 0.04))
def test_dilation_composition(seed, r, s):
    E = dl.random_union(seed, 128, max_parts=3)
    twice = dl.dilate(dl.dilate(E, r), s)
    once = dl.dilate(E, r + s)
    # exact by the triangle inequality between pixel centres
    assert twice.issubset(once)
    # lattice gaps can only lose a one-pixel band
    assert once.issubset(dl.dilate(twice, 1.5 * E.h))


def test_dilate_errors():
    E = dl.point(64)
    with pytest.raises(ValueError):
        dl.dilate(E, 0.0)
    with pytest.raises(OutOfBounds):
        dl.dilate(E, 0.45)


# area and perimeter ---------------------------------------------------------------

def test_area_examples():
    assert dl.area(dl.RasterSet.empty(32)) == 0.0
    assert dl.area(dl.RasterSet(np.ones((100, 100), bool), 0.01)) == pytest.approx(1.0, abs=1e-12)
    d = dl.disc(512, (0.5, 0.5), 0.3)
    assert dl.area(d) == pytest.approx(math.pi * 0.09, rel=0.01)


def test_perimeter_examples():
    d = dl.disc(512, (0.5, 0.5), 0.3)
    assert dl.perimeter(d) == pytest.approx(2 * math.pi * 0.3, rel=0.02)
    assert dl.perimeter(square(512, 0.3, 0.7)) == pytest.approx(1.6, rel=0.02)
    two = dl.disc(512, (0.3, 0.3), 0.1).union(dl.disc(512, (0.7, 0.65), 0.15))
    assert dl.perimeter(two) == pytest.approx(2 * math.pi * 0.25, rel=0.02)


def test_perimeter_errors():
    with pytest.raises(ValueError):
        dl.perimeter(dl.RasterSet.empty(16))
    m = np.zeros((16, 16), bool)
    m[0, 5] = True
    with pytest.raises(BoundaryContact):
        dl.perimeter(dl.RasterSet(m, 1 / 16))


def test_dilated_disc_perimeter_follows_distance_level():
    E = dl.point(512)
    for r in (0.02, 0.05, 0.1, 0.2):
        assert dl.perimeter(dl.dilate(E, r)) == pytest.approx(2 * math.pi * r, rel=0.01)


# dilation inequality ----------------------------------------------------------------

def test_point_is_near_equality():
    slack = [dl.check_dilation_inequality(dl.point(512), r).slack for r in (0.02, 0.05, 0.1)]
    assert all(abs(s) < 0.02 for s in slack)


def test_segment_stadium():
    n = 512
    # endpoints on pixel centres so the raster segment is one pixel row
    p, q = (179.5 / n, 256.5 / n), (332.5 / n, 256.5 / n)
    L = q[0] - p[0]
    E = dl.segment(n, p, q)
    assert np.count_nonzero(E.mask) == 154
    for r in (0.02, 0.05, 0.1):
        m = dl.check_dilation_inequality(E, r)
        assert m.lhs == pytest.approx(2 * L + 2 * math.pi * r, rel=0.02)
        # whole pixel rows along the straight sides: 21 rows for 2r = 20.5 h at r = 0.02
        assert m.rhs == pytest.approx(4 * L + 2 * math.pi * r, rel=0.03)
        assert m.rhs >= m.lhs


def test_point_slack_shrinks_with_resolution():
    def mean_abs(n):
        return np.mean([abs(dl.check_dilation_inequality(dl.point(n), r).slack) for r in (0.02, 0.05, 0.1)])

    assert mean_abs(512) < mean_abs(256)


def test_small_sweep_slack_and_csv(tmp_path):
    rows = dl.sweep(range(5), n=256)
    assert len(rows) == 15
    assert min(r.slack for r in rows) >= -0.03
    p = tmp_path / "sweep.csv"
    dl.write_sweep_csv(rows, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "seed,r,lhs,rhs,slack"
    assert len(lines) == 16
    seed, r, lhs, rhs, slack = lines[1].split(",")
    assert float(lhs) == rows[0].lhs and float(slack) == rows[0].slack


def test_coarea_on_disc():
    E = dl.disc(512, (0.5, 0.5), 0.1)
    c = dl.coarea_check(E, 0.05, 2 / 512)
    assert abs(c.rel_error_midpoint) < 0.05
    assert c.area_increment > 0 and c.left > 0


def test_random_union_is_deterministic():
    a = dl.random_union(11)
    b = dl.random_union(11)
    assert np.array_equal(a.mask, b.mask) and a.mask.any()


def test_pgm_round_trip(tmp_path):
    E = dl.random_union(3, 128)
    p = tmp_path / "e.pgm"
    dl.write_pgm(E, p)
    assert np.array_equal(dl.read_pgm(p).mask, E.mask)
    assert dl.read_pgm(p).h == E.h
