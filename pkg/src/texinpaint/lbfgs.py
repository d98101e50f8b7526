"""Limited-memory quasi-Newton minimization with box constraints.

Two-loop-recursion L-BFGS directions combined with projection onto the box
and a backtracking line search. With history_size=0 the method reduces to
projected gradient descent.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class OptimizerConfig:
    history_size: int = 10
    max_iterations: int = 200
    gradient_tolerance: float = 1e-5  # infinity norm of the projected gradient
    lower: float | np.ndarray | None = None
    upper: float | np.ndarray | None = None
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search_steps: int = 20

    def __post_init__(self):
        if self.history_size < 0:
            raise ValueError("history_size must be >= 0")
        if self.lower is not None and self.upper is not None:
            if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
                raise ValueError("lower bound exceeds upper bound")


@dataclass
class OptimizationReport:
    x: np.ndarray
    value: float
    iterations: int
    reason: str  # "tolerance" | "max-iter" | "line-search-failure"


def _project(x, cfg):
    if cfg.lower is not None:
        x = np.maximum(x, cfg.lower)
    if cfg.upper is not None:
        x = np.minimum(x, cfg.upper)
    return x


def _two_loop(g, pairs, gamma):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    q *= gamma
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return q


def _line_search(objective, x, f, g, d, cfg, a0=1.0):
    """Strong-Wolfe search along the projected path x(a) = P(x + a d).

    Returns (x_new, f_new, g_new) or None. The sufficient-decrease test uses
    the actual projected step; the curvature test uses the directional
    derivative along d.
    """

    def probe(a):
        xn = _project(x + a * d, cfg)
        fn, gn = objective(xn)
        return xn, fn, gn

    dphi0 = g.dot(d)
    best = None
    evals = 0

    def armijo(xn, fn):
        return np.isfinite(fn) and fn <= f + cfg.c1 * g.dot(xn - x)

    def zoom(lo, hi, lo_probe):
        nonlocal evals, best
        while evals < cfg.max_line_search_steps:
            a = 0.5 * (lo + hi)
            xn, fn, gn = probe(a)
            evals += 1
            if not armijo(xn, fn) or fn >= lo_probe[1]:
                hi = a
                continue
            dphi = gn.dot(d)
            if abs(dphi) <= -cfg.c2 * dphi0:
                return xn, fn, gn
            if dphi * (hi - lo) >= 0:
                hi = lo
            lo, lo_probe = a, (xn, fn, gn)
            best = lo_probe
        return best

    a_prev, probe_prev = 0.0, (x, f, g)
    a = a0
    while evals < cfg.max_line_search_steps:
        xn, fn, gn = probe(a)
        evals += 1
        if not armijo(xn, fn) or (a_prev > 0.0 and fn >= probe_prev[1]):
            return zoom(a_prev, a, probe_prev)
        dphi = gn.dot(d)
        if abs(dphi) <= -cfg.c2 * dphi0:
            return xn, fn, gn
        best = (xn, fn, gn)
        if dphi >= 0:
            return zoom(a, a_prev, (xn, fn, gn))
        if not np.any(xn != _project(x + 2 * a * d, cfg)):
            return best  # the projected path has flattened out
        a_prev, probe_prev = a, (xn, fn, gn)
        a *= 2.0
    return best


def minimize(objective, x0, cfg: OptimizerConfig) -> OptimizationReport:
    """Minimize objective(x) -> (value, gradient) from x0 within the box."""
    x = _project(np.asarray(x0, dtype=np.float64).copy(), cfg)
    f, g = objective(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("objective or gradient not finite at the start point")

    pairs = deque(maxlen=max(cfg.history_size, 1))
    gamma = 1.0
    reason = "max-iter"
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        pg = x - _project(x - g, cfg)
        if np.abs(pg).max() <= cfg.gradient_tolerance:
            reason = "tolerance"
            it -= 1
            break

        steepest = not (cfg.history_size > 0 and pairs)
        d = -g if steepest else -_two_loop(g, pairs, gamma)
        if d.dot(g) >= 0:  # not a descent direction; fall back
            d = -g
            steepest = True
        # steepest-descent steps start the search at a unit-infinity-norm
        # move rather than the raw gradient magnitude
        a0 = min(1.0, 1.0 / max(np.abs(d).max(), 1e-12)) if steepest else 1.0

        result = _line_search(objective, x, f, g, d, cfg, a0)
        if result is None or result[1] >= f or not np.any(result[0] != x):
            reason = "line-search-failure"
            break
        x_new, f_new, g_new = result

        s = x_new - x
        y = g_new - g
        ys = y.dot(s)
        if cfg.history_size > 0 and ys > 1e-10:
            pairs.append((s, y, 1.0 / ys))
            gamma = ys / y.dot(y)
        x, f, g = x_new, f_new, g_new
    else:
        reason = "max-iter"

    return OptimizationReport(x=x, value=f, iterations=it, reason=reason)
