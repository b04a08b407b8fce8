"""Quasi-Newton minimisation (limited-memory or dense BFGS).

The step length comes from scipy's strong-Wolfe search; when that gives up,
a plain Armijo backtracking is tried before declaring failure.
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

from .errors import LineSearchFailure, NonFiniteObjective


@dataclass
class QNResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    evaluations: int
    converged: bool
    message: str
    trace: list = field(default_factory=list)


class _Cached:
    """Memoised ``fun(x) -> (value, gradient)`` split into two callables."""

    def __init__(self, fun):
        self.fun = fun
        self.x = None
        self.count = 0

    def _eval(self, x):
        if self.x is None or not np.array_equal(x, self.x):
            v, g = self.fun(x)
            self.count += 1
            v = float(v)
            if not math.isfinite(v) or not np.all(np.isfinite(g)):
                raise NonFiniteObjective(f"objective not finite (value {v}) after {self.count} evaluations")
            self.x, self.v, self.g = x.copy(), v, np.asarray(g, dtype=float)
        return self.v, self.g

    def value(self, x):
        return self._eval(x)[0]

    def grad(self, x):
        return self._eval(x)[1]


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def _backtrack(f, x, d, fx, slope, c1, shrink=0.5, max_steps=60):
    t = 1.0
    for _ in range(max_steps):
        ft = f.value(x + t * d)
        if ft <= fx + c1 * t * slope and ft < fx:
            return t
        t *= shrink
    return None


def minimize_bfgs(
    fun,
    x0,
    *,
    gtol: float = 1e-6,
    max_iter: int = 500,
    memory: int = 10,
    c1: float = 1e-4,
    c2: float = 0.9,
    dense: bool = False,
    project=None,
    raise_on_failure: bool = False,
) -> QNResult:
    """Minimise ``fun`` (returning value and gradient) from ``x0``.

    Stops when ``max|grad| <= gtol``.  ``project`` is applied to every new
    iterate (used for gauge fixing along directions the objective ignores).
    ``trace`` holds the objective value at ``x0`` and after each iteration.
    A failed line search ends the run with ``converged=False`` unless
    ``raise_on_failure`` is set.
    """
    f = _Cached(fun)
    x = np.array(x0, dtype=float)
    if project is not None:
        x = project(x)
    fx, g = f._eval(x)
    trace = [fx]
    pairs = deque(maxlen=memory)
    Hinv = None
    n = x.size
    f_prev = None
    it = 0
    msg = "iteration limit reached"
    converged = False
    while True:
        if np.max(np.abs(g)) <= gtol:
            converged, msg = True, "gradient tolerance reached"
            break
        if it >= max_iter:
            break
        if dense:
            if Hinv is None:
                d = -g
            else:
                d = -Hinv @ g
        else:
            d = _two_loop(g, pairs)
        slope = float(np.dot(g, d))
        if not slope < 0:
            # lost descent: restart from steepest descent
            pairs.clear()
            Hinv = None
            d = -g
            slope = -float(np.dot(g, g))
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="(The line search algorithm|Rounding errors)")
            t = line_search(f.value, f.grad, x, d, g, fx, f_prev, c1=c1, c2=c2, maxiter=40)[0]
        if t is None:
            t = _backtrack(f, x, d, fx, slope, c1)
        if t is None:
            msg = "line search failed"
            if raise_on_failure:
                raise LineSearchFailure(f"no acceptable step at iteration {it}")
            break
        x_new = x + t * d
        if project is not None:
            x_new = project(x_new)
        f_new, g_new = f._eval(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.sqrt(np.dot(s, s) * np.dot(y, y)):
            if dense:
                if Hinv is None:
                    Hinv = np.eye(n) * (sy / np.dot(y, y))
                rho = 1.0 / sy
                Hy = Hinv @ y
                Hinv += (rho * rho * np.dot(y, Hy) + rho) * np.outer(s, s) - rho * (
                    np.outer(Hy, s) + np.outer(s, Hy)
                )
            else:
                pairs.append((s, y, 1.0 / sy))
        f_prev, fx, g, x = fx, f_new, g_new, x_new
        trace.append(fx)
        it += 1
    return QNResult(x, fx, g, it, f.count, converged, msg, trace)
