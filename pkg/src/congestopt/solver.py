"""Dual solve of the relaxed two-phase transport problem.

Minimises ``J(u) = sum_cells area * H*(grad u) - sum_nodes m_i f_i u_i`` over
nodal potentials and recovers the flux ``sigma = grad H*(grad u)`` together
with the mixing density.  The potential is defined up to the null modes of
the cell gradient (constants and the checkerboard); iterates are kept
orthogonal to both.

By default the dual cost is replaced by its Moreau smoothing of width
``smoothing`` (the conjugate of ``H + smoothing |s|^2 / 2``), which removes
the kink of ``H*`` and lets the quasi-Newton iteration converge to tight
tolerances.  Reported objective, dual value and gap always use the exact,
unsmoothed dual cost.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .congestion import EnvelopePair, SubgradientPolicy
from .errors import GridMismatch
from .grid import Grid, ScalarField, VectorField, divergence_residual, l1_norm, source_mass
from .quasi_newton import minimize_bfgs


@dataclass(frozen=True)
class SolverConfig:
    grad_tolerance: float = 1e-6
    max_iterations: int = 20000
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    smoothing: float = 1e-3
    dense: bool = False
    policy: SubgradientPolicy = SubgradientPolicy.PREFER_H2

    def __post_init__(self):
        if not self.grad_tolerance > 0:
            raise ValueError("grad_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.memory < 1:
            raise ValueError("memory must be at least 1")
        if not (0 < self.c1 < self.c2 < 1):
            raise ValueError("line search needs 0 < c1 < c2 < 1")
        if not self.smoothing >= 0:
            raise ValueError("smoothing must be nonnegative")
        if isinstance(self.policy, str):
            object.__setattr__(self, "policy", SubgradientPolicy(self.policy))

    @classmethod
    def preset(cls, name: str, **overrides) -> "SolverConfig":
        """``"default"``, or ``"paper"``: 20 dense BFGS steps on the unsmoothed dual."""
        try:
            base = _PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown solver preset {name!r}; known: {sorted(_PRESETS)}") from None
        return cls(**{**base, **overrides})

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)


_PRESETS = {
    "default": {},
    "paper": {"max_iterations": 20, "dense": True, "smoothing": 0.0},
}


@dataclass
class SolveReport:
    final_objective: float
    dual_value: float
    primal_value: float
    duality_gap: float
    relative_gap: float
    divergence_residual: float
    iterations: int
    evaluations: int
    converged: bool
    message: str
    grad_norm: float
    smoothing: float
    objective_trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


class Recovery(NamedTuple):
    sigma: VectorField
    theta: ScalarField
    primal_value: float


def _check_grids(u: ScalarField, f: ScalarField):
    if u.grid != f.grid:
        raise GridMismatch(f"potential on {u.grid}, source on {f.grid}")


def _terms(u: ScalarField, e: EnvelopePair, smoothing: float, policy: SubgradientPolicy | None):
    g = u.grid
    pol = (e.policy if policy is None else policy).code
    return kernels.dual_terms(u.values, g.hx, g.hy, e.params, smoothing, pol)


def objective(u: ScalarField, f: ScalarField, e: EnvelopePair, *, smoothing: float = 0.0) -> float:
    """``sum area * H*(grad u) - <f, u>`` with lumped mass for the source term."""
    _check_grids(u, f)
    vals, _, _ = _terms(u, e, smoothing, None)
    return float(u.grid.cell_area * np.sum(vals) - np.sum(source_mass(f) * u.values))


def objective_gradient(
    u: ScalarField,
    f: ScalarField,
    e: EnvelopePair,
    *,
    policy: SubgradientPolicy | None = None,
    smoothing: float = 0.0,
) -> ScalarField:
    _check_grids(u, f)
    g = u.grid
    _, sx, sy = _terms(u, e, smoothing, policy)
    a = g.cell_area
    grad = kernels.cell_gradient_adjoint(a * sx, a * sy, g.hx, g.hy) - source_mass(f)
    return ScalarField(g, grad)


def recover(
    u: ScalarField,
    e: EnvelopePair,
    policy: SubgradientPolicy | None = None,
    *,
    smoothing: float = 0.0,
) -> Recovery:
    """Flux, cell mixing density and relaxed primal cost of the flux.

    The primal cost is the quadrature of the optimal two-phase mixture
    (which coincides with the convexified cost of ``sigma``).
    """
    g = u.grid
    _, sx, sy = _terms(u, e, smoothing, policy)
    sigma = VectorField.from_components(g, sx, sy)
    mag = np.hypot(sx, sy)
    theta = ScalarField(g, e.theta(mag), "cell")
    primal = float(g.cell_area * np.sum(e.mixture_cost(mag)))
    return Recovery(sigma, theta, primal)


@functools.lru_cache(maxsize=16)
def _gradient_matrix(grid: Grid):
    """Sparse cell-gradient operator, rows ``[gx cells; gy cells]``, columns nodes."""
    nx, ny = grid.nx, grid.ny
    node = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    cell = np.arange(nx * ny).reshape(nx, ny)
    cx, cy = 0.5 / grid.hx, 0.5 / grid.hy
    rows, cols, vals = [], [], []
    corners = [(0, 0, -1, -1), (1, 0, 1, -1), (0, 1, -1, 1), (1, 1, 1, 1)]
    for di, dj, sx, sy in corners:
        c = cell.ravel()
        n = node[di : di + nx, dj : dj + ny].ravel()
        rows += [c, c + nx * ny]
        cols += [n, n]
        vals += [np.full(c.size, sx * cx), np.full(c.size, sy * cy)]
    D = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * nx * ny, (nx + 1) * (ny + 1)),
    )
    L = (D.T @ D).tocsc() * grid.cell_area
    # pin one node of each parity to remove the two-dimensional kernel
    keep = np.ones(L.shape[0], dtype=bool)
    keep[[0, 1]] = False
    idx = np.flatnonzero(keep)
    lu = splu(L[idx][:, idx].tocsc())
    return D, idx, lu


def feasible_flux(sigma: VectorField, f: ScalarField) -> VectorField:
    """Closest flux (cell-area norm) satisfying the discrete conservation law."""
    if sigma.grid != f.grid:
        raise GridMismatch("flux and source live on different grids")
    g = sigma.grid
    D, idx, lu = _gradient_matrix(g)
    a = g.cell_area
    resid = kernels.cell_gradient_adjoint(a * sigma.values[..., 0], a * sigma.values[..., 1], g.hx, g.hy)
    resid = (resid - source_mass(f)).ravel()
    v = np.zeros(resid.size)
    v[idx] = lu.solve(-resid[idx])
    dv = (D @ v).reshape(2, g.nx, g.ny)
    return VectorField.from_components(g, sigma.values[..., 0] + dv[0], sigma.values[..., 1] + dv[1])


def _gauge_projector(grid: Grid):
    modes = [m.ravel() for m in grid.null_modes()]

    def project(x):
        for m in modes:
            x = x - np.dot(m, x) * m
        return x

    return project


def check_compatible(f: ScalarField, rtol: float = 1e-9):
    """Raise ``ValueError`` unless ``f`` is orthogonal to both gradient null modes."""
    w = source_mass(f)
    i, j = np.indices(f.grid.node_shape)
    scale = max(l1_norm(f), 1e-300)
    for name, m in (("mean", 1.0), ("checkerboard", np.where((i + j) % 2 == 0, 1.0, -1.0))):
        c = float(np.sum(w * m))
        if abs(c) > rtol * scale and abs(c) > 1e-14:
            raise ValueError(f"source is not compatible: {name} component {c:.3e}")


def certify(u: ScalarField, f: ScalarField, e: EnvelopePair, smoothing: float = 0.0):
    """Dual value, feasible-flux primal value and residual of the recovered flux."""
    rec = recover(u, e, smoothing=smoothing)
    dual = -objective(u, f, e)
    feas = feasible_flux(rec.sigma, f)
    primal = float(u.grid.cell_area * np.sum(e.primal(feas.values)))
    return dual, primal, divergence_residual(rec.sigma, f), rec


def minimize(
    f: ScalarField,
    e: EnvelopePair,
    cfg: SolverConfig | None = None,
    u0: ScalarField | None = None,
):
    """Quasi-Newton minimisation of the dual functional; returns ``(u, SolveReport)``.

    The stopping test is ``max|grad J| <= grad_tolerance * min(1, ||f||_1)``.
    """
    cfg = SolverConfig() if cfg is None else cfg
    check_compatible(f)
    grid = f.grid
    if u0 is None:
        u0 = ScalarField.zeros(grid)
    _check_grids(u0, f)
    e = e.with_policy(cfg.policy)
    mass = source_mass(f)
    a = grid.cell_area
    shape = grid.node_shape
    mu = cfg.smoothing

    def fun(x):
        u = x.reshape(shape)
        vals, sx, sy = kernels.dual_terms(u, grid.hx, grid.hy, e.params, mu, e.policy.code)
        val = a * np.sum(vals) - np.sum(mass * u)
        grad = kernels.cell_gradient_adjoint(a * sx, a * sy, grid.hx, grid.hy) - mass
        return val, grad.ravel()

    scale = l1_norm(f)
    gtol = cfg.grad_tolerance * min(1.0, scale) if scale > 0 else cfg.grad_tolerance
    res = minimize_bfgs(
        fun,
        u0.values.ravel(),
        gtol=gtol,
        max_iter=cfg.max_iterations,
        memory=cfg.memory,
        c1=cfg.c1,
        c2=cfg.c2,
        dense=cfg.dense,
        project=_gauge_projector(grid),
    )
    u = ScalarField(grid, res.x.reshape(shape))
    dual, primal, resid, _ = certify(u, f, e, mu)
    gap = primal - dual
    rel = gap / abs(dual) if dual != 0 else (0.0 if gap == 0 else math.inf)
    report = SolveReport(
        final_objective=-dual,
        dual_value=dual,
        primal_value=primal,
        duality_gap=gap,
        relative_gap=rel,
        divergence_residual=resid,
        iterations=res.iterations,
        evaluations=res.evaluations,
        converged=res.converged,
        message=res.message,
        grad_norm=float(np.max(np.abs(res.grad))),
        smoothing=mu,
        objective_trace=[float(v) for v in res.trace],
    )
    return u, report
