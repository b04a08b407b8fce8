"""Structured Q1 discretisation of a rectangle ``[0, Lx] x [0, Ly]``.

Potentials live on the ``(nx+1) x (ny+1)`` nodes, fluxes on the ``nx x ny``
cells (one quadrature point at each cell centre).  Arrays are indexed
``[i, j]`` with ``x = i * hx`` and ``y = j * hy``.

The one-point cell gradient annihilates two nodal modes: the constants and
the checkerboard ``(-1)**(i+j)``.  Sources are made orthogonal to both so
that the weak conservation law is solvable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GridMismatch


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain extents must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nx + 1, self.ny + 1)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def nodes(self):
        x = np.linspace(0.0, self.lx, self.nx + 1)
        y = np.linspace(0.0, self.ly, self.ny + 1)
        return np.meshgrid(x, y, indexing="ij")

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def node_weights(self):
        """Lumped nodal masses (trapezoidal rule); they sum to the domain area."""
        wx = np.full(self.nx + 1, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny + 1, self.hy)
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def null_modes(self):
        """Orthonormal (Euclidean) basis of the kernel of the cell gradient."""
        i, j = np.indices(self.node_shape)
        ones = np.ones(self.node_shape)
        checker = np.where((i + j) % 2 == 0, 1.0, -1.0)
        basis = []
        for v in (ones, checker):
            for b in basis:
                v = v - np.sum(v * b) * b
            basis.append(v / math.sqrt(np.sum(v * v)))
        return basis


@dataclass(frozen=True)
class ScalarField:
    """Grid function sampled at the nodes (``centering="node"``) or cells."""

    grid: Grid
    values: np.ndarray
    centering: str = "node"

    def __post_init__(self):
        shape = {"node": self.grid.node_shape, "cell": self.grid.cell_shape}.get(self.centering)
        if shape is None:
            raise ValueError(f"unknown centering {self.centering!r}")
        vals = _frozen(self.values)
        if vals.shape != shape:
            raise ValueError(f"{self.centering} field needs shape {shape}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid, centering: str = "node") -> "ScalarField":
        shape = grid.node_shape if centering == "node" else grid.cell_shape
        return cls(grid, np.zeros(shape), centering)

    @classmethod
    def from_function(cls, grid: Grid, fn, centering: str = "node") -> "ScalarField":
        X, Y = grid.nodes() if centering == "node" else grid.cell_centers()
        return cls(grid, np.broadcast_to(fn(X, Y), X.shape), centering)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _match(self.grid, other.grid)
            return ScalarField(self.grid, self.values + other.values, self.centering)
        return ScalarField(self.grid, self.values + other, self.centering)


@dataclass(frozen=True)
class VectorField:
    """Two components per cell, ``values.shape == (nx, ny, 2)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.cell_shape + (2,):
            raise ValueError(f"vector field needs shape {self.grid.cell_shape + (2,)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_components(cls, grid: Grid, vx, vy) -> "VectorField":
        return cls(grid, np.stack([vx, vy], axis=-1))

    def magnitude(self) -> ScalarField:
        return ScalarField(self.grid, np.hypot(self.values[..., 0], self.values[..., 1]), "cell")


def _match(g1: Grid, g2: Grid):
    if g1 != g2:
        raise GridMismatch(f"grids differ: {g1} vs {g2}")


@dataclass(frozen=True)
class SourceConfig:
    """Gaussian supply at ``x0`` and demand at ``x1`` with common variance ``lam``.

    ``normalization="paper"`` uses the prefactor ``1/sqrt(2 pi lam)``;
    ``"probability"`` uses ``1/(2 pi lam)`` so that each bump has unit mass
    in the plane.
    """

    lam: float
    x0: tuple[float, float] = (0.3, 0.3)
    x1: tuple[float, float] = (0.7, 0.7)
    normalization: str = "paper"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("variance must be positive")
        if self.normalization not in ("paper", "probability"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def prefactor(self) -> float:
        if self.normalization == "paper":
            return 1.0 / math.sqrt(2.0 * math.pi * self.lam)
        return 1.0 / (2.0 * math.pi * self.lam)

    def bump(self, X, Y, center):
        d2 = (X - center[0]) ** 2 + (Y - center[1]) ** 2
        return self.prefactor * np.exp(-d2 / (2.0 * self.lam))


def compatible_source(grid: Grid, values) -> np.ndarray:
    """Shift ``values`` by a uniform constant and a checkerboard so that they
    integrate to zero against both null modes of the cell gradient."""
    f = np.array(values, dtype=float)
    w = grid.node_weights()
    i, j = np.indices(grid.node_shape)
    modes = [np.ones(grid.node_shape), np.where((i + j) % 2 == 0, 1.0, -1.0)]
    G = np.array([[np.sum(w * a * b) for b in modes] for a in modes])
    rhs = np.array([np.sum(w * f * a) for a in modes])
    coef = np.linalg.solve(G, rhs)
    return f - coef[0] * modes[0] - coef[1] * modes[1]


def build_source(grid: Grid, src: SourceConfig, *, which: str = "both") -> ScalarField:
    """Nodal samples of ``f = f+ - f-``, made exactly compatible with the
    Neumann problem (zero discrete integral).

    ``which="plus"`` or ``"minus"`` returns a single raw bump, uncorrected.
    """
    for c in (src.x0, src.x1):
        if not (0.0 <= c[0] <= grid.lx and 0.0 <= c[1] <= grid.ly):
            raise ValueError(f"source centre {c} outside the domain")
    X, Y = grid.nodes()
    fp = src.bump(X, Y, src.x0)
    fm = src.bump(X, Y, src.x1)
    if which == "plus":
        return ScalarField(grid, fp)
    if which == "minus":
        return ScalarField(grid, fm)
    return ScalarField(grid, compatible_source(grid, fp - fm))


def gradient(u: ScalarField) -> VectorField:
    """Cell-centre gradient of the bilinear interpolant of ``u``."""
    if u.centering != "node":
        raise ValueError("gradient needs a node-centred field")
    g = u.grid
    gx, gy = kernels.cell_gradient_np(u.values, g.hx, g.hy)
    return VectorField.from_components(g, gx, gy)


def weak_divergence(w: VectorField) -> np.ndarray:
    """Nodal vector ``<w, grad phi_i>`` over all nodal hat functions ``phi_i``.

    This is the adjoint of :func:`gradient` for the cell-area inner product:
    ``sum_cells area * grad(u) . w == sum_nodes u * weak_divergence(w)``.
    """
    g = w.grid
    a = g.cell_area
    return kernels.cell_gradient_adjoint(a * w.values[..., 0], a * w.values[..., 1], g.hx, g.hy)


def integrate(field: ScalarField) -> float:
    """Integral over the domain: nodal mass lumping, or the midpoint rule on cells."""
    g = field.grid
    if field.centering == "node":
        return float(np.sum(g.node_weights() * field.values))
    return float(np.sum(field.values) * g.cell_area)


def source_mass(f: ScalarField) -> np.ndarray:
    """Nodal vector ``<f, phi_i>`` under mass lumping."""
    return f.grid.node_weights() * f.values


def l1_norm(f: ScalarField) -> float:
    return float(np.sum(f.grid.node_weights() * np.abs(f.values)))


def divergence_residual(sigma: VectorField, f: ScalarField) -> float:
    """``max_i |<sigma, grad phi_i> - <f, phi_i>|`` relative to ``||f||_1``.

    Zero exactly when ``-div sigma = f`` with ``sigma . n = 0`` holds in the
    discrete weak sense.  For ``f = 0`` the absolute residual is returned.
    """
    _match(sigma.grid, f.grid)
    if f.centering != "node":
        raise ValueError("source must be node-centred")
    r = weak_divergence(sigma) - source_mass(f)
    scale = l1_norm(f)
    res = float(np.max(np.abs(r)))
    return res / scale if scale > 0 else res
