"""Limited-memory BFGS with Armijo backtracking.

The optimizer only ever accepts steps that satisfy the Armijo decrease
condition, so the recorded energy trace is non-increasing and the returned
point never has higher energy than the start.  Non-finite trial energies are
treated as rejected steps; a non-finite energy or gradient at an accepted
iterate aborts with the last finite iterate.  Termination reasons:
"gradient" (sup-norm below g_tol), "energy-stall" (relative decrease below
f_tol over stall_window iterations, or no descent step found), "max-iter",
and "abort-nonfinite".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class MinimizeOptions:
    max_iterations: int = 5000
    g_tol: float = 1e-8
    f_tol: float = 1e-12
    memory: int = 10
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 40
    stall_window: int = 10
    seed: int = 0  # consumed by callers that run randomized restarts


@dataclass
class MinimizeResult:
    x: Array
    energy: float
    iterations: int
    reason: str
    trace_energy: Array
    trace_grad_inf: Array
    trace_step: Array
    message: str = ""
    breakdown: object = None

    @property
    def trace(self) -> Array:
        return np.column_stack([self.trace_energy, self.trace_grad_inf, self.trace_step])


def _two_loop(g: Array, s_list: list[Array], y_list: list[Array],
              rho_list: list[float]) -> Array:
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    if y_list:
        y = y_list[-1]
        q *= s_list[-1].dot(y) / y.dot(y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return q


def minimize(f: Callable[[Array], float], grad: Callable[[Array], Array],
             x0: Array, options: MinimizeOptions = MinimizeOptions(),
             breakdown_fn: Callable[[Array], object] | None = None) -> MinimizeResult:
    opts = options
    x = np.asarray(x0, dtype=float).copy()
    energies: list[float] = []
    grad_norms: list[float] = []
    steps: list[float] = []

    def result(reason: str, msg: str = "") -> MinimizeResult:
        res = MinimizeResult(x, energies[-1] if energies else np.nan,
                             max(len(steps) - 1, 0), reason,
                             np.array(energies), np.array(grad_norms),
                             np.array(steps), msg)
        if breakdown_fn is not None and energies:
            res.breakdown = breakdown_fn(x)
        return res

    fx = f(x)
    if not np.isfinite(fx):
        return MinimizeResult(x, np.nan, 0, "abort-nonfinite",
                              np.array([]), np.array([]), np.array([]),
                              "energy not finite at the start")
    g = grad(x)
    if not np.all(np.isfinite(g)):
        energies.append(fx)
        grad_norms.append(np.nan)
        steps.append(0.0)
        return result("abort-nonfinite", "gradient not finite at the start")
    gnorm = float(np.abs(g).max()) if g.size else 0.0
    energies.append(fx)
    grad_norms.append(gnorm)
    steps.append(0.0)

    s_list: list[Array] = []
    y_list: list[Array] = []
    rho_list: list[float] = []

    for it in range(opts.max_iterations):
        if gnorm <= opts.g_tol:
            return result("gradient")

        d = -_two_loop(g, s_list, y_list, rho_list)
        gd = float(g.dot(d))
        if gd >= 0.0:
            d = -g
            gd = float(g.dot(d))

        accepted = False
        for attempt in range(2):
            t = 1.0
            for _ in range(opts.max_backtracks):
                x_new = x + t * d
                f_new = f(x_new)
                if np.isfinite(f_new) and f_new <= fx + opts.armijo_c1 * t * gd:
                    accepted = True
                    break
                t *= opts.backtrack_factor
            if accepted or np.array_equal(d, -g):
                break
            d = -g  # quasi-Newton direction failed; retry with steepest descent
            gd = float(g.dot(d))
        if not accepted:
            return result("energy-stall", "line search found no descent step")

        g_new = grad(x_new)
        if not np.all(np.isfinite(g_new)):
            return result("abort-nonfinite",
                          f"gradient not finite after iteration {it + 1}")
        s = x_new - x
        y = g_new - g
        sy = float(s.dot(y))
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > opts.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        x, fx, g = x_new, float(f_new), g_new
        gnorm = float(np.abs(g).max())
        energies.append(fx)
        grad_norms.append(gnorm)
        steps.append(t)

        w = opts.stall_window
        if len(energies) > w:
            drop = energies[-1 - w] - energies[-1]
            if drop <= opts.f_tol * max(1.0, abs(energies[-1])):
                return result("energy-stall")

    return result("max-iter")


def check_gradient(f: Callable[[Array], float], grad: Callable[[Array], Array],
                   x: Array, step: float = 1e-6) -> float:
    """Worst deviation between grad and central differences, relative to the
    largest finite-difference component (so tiny components are not measured
    against their own rounding noise)."""
    x = np.asarray(x, dtype=float)
    g = grad(x)
    fd = np.empty_like(g)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    scale = max(float(np.abs(fd).max()), float(np.abs(g).max()), 1e-300)
    return float(np.abs(g - fd).max()) / scale
