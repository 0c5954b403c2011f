"""Gradient-based optimizers and a finite-difference gradient checker."""

from __future__ import annotations

import logging
from collections import deque
from typing import Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)


class ObjectiveEvaluation(NamedTuple):
    value: float
    gradient: np.ndarray


class OptimizeResult(NamedTuple):
    x: np.ndarray
    value: float
    status: str
    iterations: int
    evaluations: int


class OptimizerError(RuntimeError):
    pass


def lbfgs_minimize(objective: Callable, x0, max_iters=1000, grad_tol=1e-6,
                   memory=10, c1=1e-4, contraction=0.5, max_backtracks=40,
                   ftol=2.2e-9) -> OptimizeResult:
    """Unconstrained L-BFGS with a backtracking Armijo line search.

    ``objective(x)`` returns ``(value, gradient)``. The iteration stops when
    the gradient infinity norm falls below ``grad_tol``, when the relative
    decrease of an accepted step falls below ``ftol``, when no step length
    yields a decrease, or after ``max_iters`` iterations. The returned point
    is always the best accepted iterate.
    """
    x = np.array(x0, dtype=float)
    f, g = objective(x)
    g = np.asarray(g, dtype=float)
    nfev = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizerError(f"objective not finite at x0 (value={f})")

    s_hist, y_hist = deque(maxlen=memory), deque(maxlen=memory)
    status = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        if np.max(np.abs(g)) <= grad_tol:
            status = "converged"
            it -= 1
            break

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in reversed(list(zip(s_hist, y_hist))):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a, s, y))
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= (s @ y) / (y @ y)
        else:
            q /= max(np.linalg.norm(g), 1.0)
        for rho, a, s, y in reversed(alphas):
            b = rho * (y @ q)
            q += (a - b) * s
        d = -q
        slope = g @ d
        if slope >= 0:
            # not a descent direction; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            d = -g / max(np.linalg.norm(g), 1.0)
            slope = g @ d

        step = 1.0
        accepted = False
        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = objective(x_new)
            nfev += 1
            if np.isfinite(f_new) and np.all(np.isfinite(g_new)) and f_new <= f + c1 * step * slope:
                accepted = True
                break
            step *= contraction
        if not accepted:
            status = "line_search_failed"
            break

        g_new = np.asarray(g_new, dtype=float)
        s_vec, y_vec = x_new - x, g_new - g
        if s_vec @ y_vec > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
            s_hist.append(s_vec)
            y_hist.append(y_vec)
        rel_decrease = (f - f_new) / max(abs(f), abs(f_new), 1.0)
        x, f, g = x_new, float(f_new), g_new
        if rel_decrease <= ftol:
            status = "ftol"
            break
    log.debug("lbfgs: %s after %d iterations (%d evaluations), f=%g", status, it, nfev, f)
    return OptimizeResult(x, float(f), status, it, nfev)


def adam_step_loop(stochastic_gradient: Callable, x0, steps: int, lr=0.001,
                   beta1=0.9, beta2=0.999, eps=1e-7, rng=None, callback=None):
    """Run ``steps`` Adam updates; ``stochastic_gradient(x, rng)`` returns a gradient."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t in range(1, steps + 1):
        g = np.asarray(stochastic_gradient(x, rng), dtype=float)
        if not np.all(np.isfinite(g)):
            bad = np.flatnonzero(~np.isfinite(g))
            raise OptimizerError(f"non-finite gradient at step {t}, entries {bad[:10].tolist()}")
        x = adam_update(x, g, m, v, t, lr, beta1, beta2, eps)
        if callback is not None:
            callback(t, x)
    return x


def adam_update(x, g, m, v, t, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-7):
    """One in-place-moment Adam update; returns the new parameter vector."""
    m *= beta1
    m += (1 - beta1) * g
    v *= beta2
    v += (1 - beta2) * g * g
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return x - lr * m_hat / (np.sqrt(v_hat) + eps)


def finite_diff_gradient(f: Callable, x, h=1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e.flat[d] = h
        grad.flat[d] = (f(x + e) - f(x - e)) / (2 * h)
    return grad
