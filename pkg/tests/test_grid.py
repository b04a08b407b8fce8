import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.special import erf

from congestopt.errors import GridMismatch
from congestopt.grid import (
    Grid,
    ScalarField,
    SourceConfig,
    VectorField,
    build_source,
    divergence_residual,
    gradient,
    integrate,
    weak_divergence,
)

G30 = Grid(30, 30)


def test_grid_geometry():
    g = Grid(30, 20, 1.0, 2.0)
    assert g.hx == pytest.approx(1 / 30) and g.hy == pytest.approx(0.1)
    assert g.area == 2.0
    assert g.node_weights().sum() == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError):
        Grid(3, 10)


def test_field_validation():
    with pytest.raises(ValueError):
        ScalarField(G30, np.zeros((30, 30)))
    with pytest.raises(ValueError):
        ScalarField(G30, np.full((31, 31), np.nan))
    with pytest.raises(ValueError):
        VectorField(G30, np.zeros((31, 31, 2)))
    f = ScalarField.zeros(G30)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


# sources ----------------------------------------------------------------------

def test_source_symmetric_centres_cancel():
    f = build_source(G30, SourceConfig(0.02, (0.4, 0.6), (0.4, 0.6)))
    assert np.all(f.values == 0.0)


def test_source_reference_configuration():
    f = build_source(G30, SourceConfig(0.02))
    X, Y = G30.nodes()
    imax, imin = np.argmax(f.values), np.argmin(f.values)
    assert (X.flat[imax], Y.flat[imax]) == pytest.approx((0.3, 0.3), abs=0.034)
    assert (X.flat[imin], Y.flat[imin]) == pytest.approx((0.7, 0.7), abs=0.034)
    assert abs(integrate(f)) < 1e-14


def test_narrow_source_has_larger_peak():
    wide = build_source(G30, SourceConfig(0.02, normalization="probability"), which="plus")
    narrow = build_source(G30, SourceConfig(0.001, normalization="probability"), which="plus")
    # peaks scale like 1 / (2 pi lambda)
    assert narrow.values.max() > wide.values.max()
    assert narrow.values.max() == pytest.approx(1 / (2 * math.pi * 0.001), rel=0.05)
    paper = build_source(G30, SourceConfig(0.001), which="plus")
    assert paper.values.max() == pytest.approx(1 / math.sqrt(2 * math.pi * 0.001), rel=0.05)


def test_gaussian_mass():
    # unit-mass Gaussian well inside the domain; reference from the error function
    g = Grid(200, 200)
    src = SourceConfig(0.001, normalization="probability")
    fp = build_source(g, src, which="plus")
    s = math.sqrt(2 * 0.001)
    ref = 0.25 * (erf(0.7 / s) + erf(0.3 / s)) ** 2
    assert integrate(fp) == pytest.approx(ref, abs=1e-3)
    assert integrate(fp) == pytest.approx(1.0, abs=1e-3)


def test_gaussian_mass_paper_normalisation():
    g = Grid(200, 200)
    fp = build_source(g, SourceConfig(0.001), which="plus")
    assert integrate(fp) == pytest.approx(math.sqrt(2 * math.pi * 0.001), rel=2e-3)


@given(
    lam=st.floats(0.0005, 0.1),
    x0=st.tuples(st.floats(0, 1), st.floats(0, 1)),
    x1=st.tuples(st.floats(0, 1), st.floats(0, 1)),
    n=st.integers(4, 40),
)
def test_source_always_compatible(lam, x0, x1, n):
    g = Grid(n, n + 1)
    f = build_source(g, SourceConfig(lam, x0, x1))
    w = g.node_weights()
    i, j = np.indices(g.node_shape)
    scale = max(1.0, np.abs(f.values).max())
    assert abs(np.sum(w * f.values)) < 1e-13 * scale
    assert abs(np.sum(w * f.values * (-1.0) ** (i + j))) < 1e-13 * scale


def test_source_validation():
    with pytest.raises(ValueError):
        SourceConfig(0.0)
    with pytest.raises(ValueError):
        build_source(G30, SourceConfig(0.02, (1.2, 0.5)))


# gradient ---------------------------------------------------------------------

def test_gradient_of_constant_is_zero():
    u = ScalarField(G30, np.full(G30.node_shape, 3.7))
    assert np.all(gradient(u).values == 0)


def test_gradient_of_affine_is_exact():
    g = Grid(17, 23, 1.0, 1.5)
    u = ScalarField.from_function(g, lambda x, y: 2.0 * x - 3.0 * y + 1.0)
    v = gradient(u).values
    assert np.allclose(v[..., 0], 2.0, atol=1e-12)
    assert np.allclose(v[..., 1], -3.0, atol=1e-12)
    u = ScalarField.from_function(g, lambda x, y: x)
    assert np.allclose(gradient(u).values, [1.0, 0.0], atol=1e-12)


def test_gradient_second_order():
    errs = []
    for n in (15, 30, 60, 120):
        g = Grid(n, n)
        u = ScalarField.from_function(g, lambda x, y: np.sin(3 * x) * np.cos(2 * y) + x * x + y * y)
        X, Y = g.cell_centers()
        ex = np.stack([3 * np.cos(3 * X) * np.cos(2 * Y) + 2 * X, -2 * np.sin(3 * X) * np.sin(2 * Y) + 2 * Y], -1)
        errs.append(np.abs(gradient(u).values - ex).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9), orders


def test_gradient_quadratic_example():
    u = ScalarField.from_function(G30, lambda x, y: x * x + y * y)
    X, Y = G30.cell_centers()
    v = gradient(u).values
    # x^2 + y^2 is recovered exactly at cell centres by the bilinear element
    assert np.allclose(v[..., 0], 2 * X, atol=1e-12)
    assert np.allclose(v[..., 1], 2 * Y, atol=1e-12)


@given(
    hnp.arrays(np.float64, (9, 7), elements=st.floats(-10, 10)),
    hnp.arrays(np.float64, (8, 6, 2), elements=st.floats(-10, 10)),
)
def test_integration_by_parts(u, w):
    g = Grid(8, 6, 1.0, 0.75)
    U = ScalarField(g, u)
    W = VectorField(g, w)
    lhs = g.cell_area * np.sum(gradient(U).values * w)
    rhs = np.sum(u * weak_divergence(W))
    assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-11)


def test_gradient_null_modes():
    i, j = np.indices(G30.node_shape)
    checker = ScalarField(G30, (-1.0) ** (i + j))
    assert np.abs(gradient(checker).values).max() < 1e-12
    modes = G30.null_modes()
    assert abs(np.sum(modes[0] * modes[1])) < 1e-12


# residual and quadrature -------------------------------------------------------

def test_residual_examples():
    zero_s = VectorField(G30, np.zeros(G30.cell_shape + (2,)))
    assert divergence_residual(zero_s, ScalarField.zeros(G30)) == 0.0
    f = build_source(G30, SourceConfig(0.02))
    assert divergence_residual(zero_s, f) > 0.0
    with pytest.raises(GridMismatch):
        divergence_residual(VectorField(Grid(10, 10), np.zeros((10, 10, 2))), f)


def test_residual_vanishes_for_exact_discrete_solution():
    # sigma = grad(v) with v solving the discrete Neumann problem for f
    from congestopt.solver import feasible_flux

    f = build_source(G30, SourceConfig(0.02))
    sig = feasible_flux(VectorField(G30, np.zeros(G30.cell_shape + (2,))), f)
    assert divergence_residual(sig, f) < 1e-12


def test_integrate_examples():
    one = ScalarField(G30, np.ones(G30.node_shape))
    assert integrate(one) == pytest.approx(1.0, rel=1e-14)
    cells = ScalarField(G30, np.ones(G30.cell_shape), "cell")
    assert integrate(cells) == pytest.approx(1.0, rel=1e-14)
    assert abs(integrate(build_source(G30, SourceConfig(0.001)))) < 1e-14
