"""Box-constrained quasi-Newton minimisation.

A projected limited-memory BFGS method. Variables that sit on (or within a
small margin of) a bound with the gradient pushing outward are held fixed
for the iteration; the two-loop recursion runs on the rest, and a projected
backtracking line search keeps every iterate inside the box.

The core loop is written in the subset of Python that numba compiles, so
the same source serves two modes: compiled, bound to a compiled objective
(used by the fitting code), and interpreted, for arbitrary Python callables.
"""

from __future__ import annotations

import math
import types
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

STATUS_GRADIENT = 0
STATUS_FUNCTION = 1
STATUS_MAXITER = 2
STATUS_LINESEARCH = 3
STATUS_NONFINITE = 4

_MAX_BACKTRACKS = 40
_ARMIJO = 1e-4
_ACTIVE_MARGIN = 1e-3


class NonFiniteError(FloatingPointError):
    """Objective or gradient evaluated to NaN/inf."""

    def __init__(self, message: str, point: np.ndarray):
        super().__init__(message)
        self.point = np.array(point, copy=True)


@dataclass(frozen=True)
class SolverSettings:
    """Stopping rules and memory for :func:`minimize_bounded`.

    A run converges when the projected-gradient infinity norm reaches
    ``gradient_tolerance`` and gives up after ``max_iterations``.

    It also stops, converged, once progress has stalled near a stationary
    point: the last step lowered the objective by at most
    ``function_tolerance * |f|`` (or the line search found no lower value at
    all) while the projected gradient is already below
    ``stall_gradient_tolerance``. The defaults match the usual L-BFGS-B
    ones (``factr = 1e7``, ``pgtol = 1e-5``). The gradient guard keeps a
    flat but badly scaled direction from ending the run early; set
    ``stall_gradient_tolerance`` equal to ``gradient_tolerance`` to turn
    the stall exit off.
    """

    max_iterations: int = 500
    gradient_tolerance: float = 1e-8
    history_size: int = 10
    function_tolerance: float = 0.0
    stall_gradient_tolerance: float = 1e-5

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not (self.gradient_tolerance > 0):
            raise ValueError(f"gradient_tolerance must be > 0, got {self.gradient_tolerance}")
        if int(self.history_size) != self.history_size or self.history_size < 1:
            raise ValueError(f"history_size must be >= 1, got {self.history_size}")
        if not (self.function_tolerance >= 0):
            raise ValueError(f"function_tolerance must be >= 0, got {self.function_tolerance}")
        if not (self.stall_gradient_tolerance >= self.gradient_tolerance):
            raise ValueError("stall_gradient_tolerance must be >= gradient_tolerance, "
                             f"got {self.stall_gradient_tolerance}")


class OptimizeOutcome(NamedTuple):
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    projected_gradient_norm: float


def projected_gradient(x, grad, lower, upper) -> np.ndarray:
    """Gradient with components that push against an active bound zeroed."""
    pg = np.array(grad, dtype=float)
    pg[(x <= lower) & (pg > 0)] = 0.0
    pg[(x >= upper) & (pg < 0)] = 0.0
    pg[lower == upper] = 0.0
    return pg


@njit(cache=True)
def _pg_inf(x, g, lower, upper):
    worst = 0.0
    for i in range(x.size):
        gi = g[i]
        if lower[i] == upper[i]:
            continue
        if x[i] <= lower[i] and gi > 0:
            continue
        if x[i] >= upper[i] and gi < 0:
            continue
        if abs(gi) > worst:
            worst = abs(gi)
    return worst


@njit(cache=True)
def _finite(f, g):
    if not math.isfinite(f):
        return False
    for i in range(g.size):
        if not math.isfinite(g[i]):
            return False
    return True


def _objective(x, data):
    raise NotImplementedError("bind an objective with specialise_core")


def _lbfgs_core(data, x0, lower, upper, max_iter, gtol, ftol, stall_gtol, memory):
    """Returns ``(x, f, g, iterations, status)``; see the STATUS_* codes.

    Evaluates the module-level name ``_objective``; use
    :func:`specialise_core` to get a copy bound to a real objective.
    """
    n = x0.size
    x = np.minimum(np.maximum(x0.copy(), lower), upper)
    f, g = _objective(x, data)
    if not _finite(f, g):
        return x, f, g, 0, STATUS_NONFINITE

    S = np.zeros((memory, n))
    Y = np.zeros((memory, n))
    stored = 0
    head = 0  # slot for the next pair
    alpha = np.zeros(memory)
    free = np.ones(n, dtype=np.bool_)
    d = np.zeros(n)

    it = 0
    status = STATUS_MAXITER
    stalled = False
    while True:
        pg = _pg_inf(x, g, lower, upper)
        if pg <= gtol:
            status = STATUS_GRADIENT
            break
        if stalled and pg <= stall_gtol:
            status = STATUS_FUNCTION
            break
        if it >= max_iter:
            status = STATUS_MAXITER
            break

        # variables held at a bound this iteration
        for i in range(n):
            near_lo = x[i] - lower[i] <= _ACTIVE_MARGIN * (1.0 + abs(lower[i]))
            near_hi = upper[i] - x[i] <= _ACTIVE_MARGIN * (1.0 + abs(upper[i]))
            free[i] = not ((near_lo and g[i] > 0) or (near_hi and g[i] < 0) or lower[i] == upper[i])

        # two-loop recursion restricted to the free variables
        q = np.where(free, g, 0.0)
        gamma = 0.0
        used = 0
        for k in range(stored):
            j = (head - 1 - k) % memory
            sy = 0.0
            for i in range(n):
                if free[i]:
                    sy += S[j, i] * Y[j, i]
            if sy <= 1e-12:
                alpha[j] = math.nan
                continue
            if gamma == 0.0:
                yy = 0.0
                for i in range(n):
                    if free[i]:
                        yy += Y[j, i] * Y[j, i]
                gamma = sy / yy
            a = 0.0
            for i in range(n):
                if free[i]:
                    a += S[j, i] * q[i]
            a /= sy
            alpha[j] = a
            for i in range(n):
                if free[i]:
                    q[i] -= a * Y[j, i]
            used += 1
        if used == 0:
            ginf = 0.0
            for i in range(n):
                if free[i] and abs(g[i]) > ginf:
                    ginf = abs(g[i])
            gamma = 1.0 / max(ginf, 1.0)
        r = gamma * q
        for k in range(stored - 1, -1, -1):
            j = (head - 1 - k) % memory
            a = alpha[j]
            if a != a:
                continue
            sy = 0.0
            yr = 0.0
            for i in range(n):
                if free[i]:
                    sy += S[j, i] * Y[j, i]
                    yr += Y[j, i] * r[i]
            b = yr / sy
            for i in range(n):
                if free[i]:
                    r[i] += S[j, i] * (a - b)
        for i in range(n):
            if free[i]:
                d[i] = -r[i]
            elif lower[i] == upper[i]:
                d[i] = 0.0
            else:
                d[i] = -gamma * g[i]

        gd = 0.0
        for i in range(n):
            gd += g[i] * d[i]
        if not gd < 0.0:
            # lost descent: drop the memory and go down the gradient
            stored = 0
            head = 0
            ginf = 0.0
            for i in range(n):
                if abs(g[i]) > ginf:
                    ginf = abs(g[i])
            for i in range(n):
                d[i] = 0.0 if lower[i] == upper[i] else -g[i] / max(ginf, 1.0)

        # projected backtracking line search
        t = 1.0
        accepted = False
        nonfinite = False
        x_new = x.copy()
        f_new = f
        g_new = g
        for _ in range(_MAX_BACKTRACKS):
            for i in range(n):
                v = x[i] + t * d[i]
                if v < lower[i]:
                    v = lower[i]
                elif v > upper[i]:
                    v = upper[i]
                x_new[i] = v
            slope = 0.0
            moved = False
            for i in range(n):
                step = x_new[i] - x[i]
                slope += g[i] * step
                if step != 0.0:
                    moved = True
            if not moved:
                break
            f_new, g_new = _objective(x_new, data)
            if not _finite(f_new, g_new):
                nonfinite = True
                break
            if f_new <= f + _ARMIJO * slope:
                accepted = True
                break
            # safeguarded quadratic interpolation along the arc
            denom = 2.0 * (f_new - f - slope)
            t_q = -slope * t / denom if denom > 0 else 0.5 * t
            t = min(0.5 * t, max(0.1 * t, t_q))
        if nonfinite:
            return x_new, f_new, g_new, it, STATUS_NONFINITE
        if not accepted:
            status = STATUS_LINESEARCH
            break

        it += 1
        sy = 0.0
        yy = 0.0
        for i in range(n):
            s_i = x_new[i] - x[i]
            y_i = g_new[i] - g[i]
            S[head, i] = s_i
            Y[head, i] = y_i
            sy += s_i * y_i
            yy += y_i * y_i
        if sy > 2.2e-16 * yy:
            head = (head + 1) % memory
            if stored < memory:
                stored += 1
        f_old = f
        x = x_new.copy()
        f = f_new
        g = g_new.copy()
        stalled = f_old - f <= ftol * max(abs(f_old), abs(f))
    return x, f, g, it, status


def specialise_core(objective, name: str, compile: bool = False):
    """Copy of the solver core that calls ``objective(x, data) -> (f, g)``.

    With ``compile=True`` the objective must itself be a numba function and
    the copy is compiled and cached under ``name``, which therefore has to
    be unique per objective.
    """
    namespace = dict(_lbfgs_core.__globals__)
    namespace["_objective"] = objective
    core = types.FunctionType(_lbfgs_core.__code__, namespace, name)
    core.__qualname__ = name
    core.__doc__ = _lbfgs_core.__doc__
    core.__module__ = _lbfgs_core.__module__
    return njit(cache=True)(core) if compile else core


def _as_bounds(bounds, n):
    arr = np.asarray(bounds, dtype=float)
    if arr.shape != (n, 2):
        raise ValueError(f"bounds must have shape ({n}, 2), got {arr.shape}")
    lower, upper = arr[:, 0].copy(), arr[:, 1].copy()
    if np.any(lower > upper):
        raise ValueError("every lower bound must be <= its upper bound")
    return lower, upper


def finish(x, f, g, iterations, status, lower, upper, settings) -> OptimizeOutcome:
    """Turn a raw core result into an :class:`OptimizeOutcome`."""
    if status == STATUS_NONFINITE:
        raise NonFiniteError(f"objective or gradient is not finite at {np.asarray(x).tolist()}", x)
    pg_norm = float(_pg_inf(x, g, lower, upper))
    if status in (STATUS_GRADIENT, STATUS_FUNCTION):
        converged = True
    else:
        # numerical floor or iteration cap: near-stationary is good enough
        converged = pg_norm <= settings.stall_gradient_tolerance
    return OptimizeOutcome(np.asarray(x, dtype=float), float(f), bool(converged), int(iterations), pg_norm)


def minimize_bounded(
    objective: Callable,
    gradient,
    x0,
    bounds,
    settings: SolverSettings = SolverSettings(),
) -> OptimizeOutcome:
    """Minimise ``objective`` over the box ``bounds`` starting from ``x0``.

    ``gradient`` is either a callable returning the gradient, or ``True``
    when ``objective`` itself returns ``(value, gradient)``. ``bounds`` is a
    sequence of ``(lower, upper)`` pairs; equal pairs pin a parameter.

    Stopping follows :class:`SolverSettings`. A line search that can find
    no lower value also ends the run; it counts as converged under the same
    gradient guard as a stalled decrease. Every iterate stays inside the box and the objective
    never increases.

    Raises :class:`NonFiniteError` when a NaN/inf value or gradient shows
    up, carrying the offending point.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    lower, upper = _as_bounds(bounds, x0.size)
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("x0 must lie within bounds")

    if gradient is True:
        def fg(x, _data):
            value, grad = objective(x.copy())
            return float(value), np.asarray(grad, dtype=float).reshape(-1)
    else:
        def fg(x, _data):
            return float(objective(x.copy())), np.asarray(gradient(x.copy()), dtype=float).reshape(-1)

    raw = specialise_core(fg, "_lbfgs_python")(
        None, x0, lower, upper,
        int(settings.max_iterations), float(settings.gradient_tolerance),
        float(settings.function_tolerance), float(settings.stall_gradient_tolerance),
        int(settings.history_size),
    )
    return finish(*raw, lower, upper, settings)
