"""Solely parametric identification: linear least squares and support vector regression."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import BasisModel, Dataset, Prediction, rmse

log = logging.getLogger(__name__)


class SVRConvergenceError(RuntimeError):
    pass


@dataclass
class ParametricFitReport:
    coefficients: np.ndarray
    train_rmse: np.ndarray
    rank: int
    degenerate: bool = False
    iterations: int = 0


def stacked_regressor(model: BasisModel, inputs, targets=None):
    """Stack per-output basis rows into one (N*D_out, M) regressor matrix."""
    phi = model.features(inputs)
    A = phi.reshape(-1, model.n_coef)
    if targets is None:
        return A
    y = np.asarray(targets, dtype=float).reshape(phi.shape[0], phi.shape[1]).reshape(-1)
    return A, y


def _report(model, data, theta, rank, degenerate=False, iterations=0):
    pred = model.predict(data.inputs, theta)
    return ParametricFitReport(np.asarray(theta, float), rmse(pred, data.targets), int(rank),
                               degenerate, iterations)


def lls_fit(model: BasisModel, data: Dataset, rcond=1e-10) -> ParametricFitReport:
    """Minimum-norm least-squares coefficients via SVD with a relative cutoff."""
    A, y = stacked_regressor(model, data.inputs, data.targets)
    if not np.any(A):
        log.warning("all-zero feature matrix; returning zero coefficients")
        return _report(model, data, np.zeros(model.n_coef), 0, degenerate=True)
    theta, _, rank, _ = np.linalg.lstsq(A, y, rcond=rcond)
    return _report(model, data, theta, rank)


def _svr_violation(beta, grad, C, eps):
    """Projected-gradient optimality violation of the bias-free epsilon-SVR dual."""
    up = grad + eps    # derivative for beta > 0
    dn = grad - eps    # derivative for beta < 0
    v = np.where(beta > 0, np.abs(up), np.where(beta < 0, np.abs(dn),
                 np.maximum(0.0, np.maximum(-up, dn))))
    v = np.where(beta >= C, np.maximum(0.0, up), v)
    v = np.where(beta <= -C, np.maximum(0.0, -dn), v)
    return v


def _dual_from_active_set(A, y, r, C, eps, band):
    """Exact dual point for the active set read off the residuals ``r = Aw - y``.

    Points farther than ``band`` outside the tube are bounded (``beta = -C*sign(r)``),
    points farther than ``band`` inside are zero, and the rest sit on the tube
    edge. The edge block solves ``A_E w = y_E + eps*sign(r_E)`` in
    minimum-norm form via a thin SVD.
    """
    u = np.abs(r) - eps
    beta = np.where(u > band, -C * np.sign(r), 0.0)
    edge = np.abs(u) <= band
    if edge.any():
        w_fixed = A[~edge].T @ beta[~edge]
        Ae = A[edge]
        rhs = y[edge] + eps * np.sign(r[edge]) - Ae @ w_fixed
        U, S, _ = np.linalg.svd(Ae, full_matrices=False)
        if S.size and S.max() > 0:
            keep = S > 1e-12 * S.max()
            U, S = U[:, keep], S[keep]
            be = U @ ((U.T @ rhs) / S**2)
            beta[edge] = np.clip(be, -C, C)
    return beta


def _smoothed_primal_newton(A, y, C, eps, delta, w, max_newton=100):
    """Newton's method on the Huber-smoothed primal objective.

    ``1/2|w|^2 + C*sum(l(a_i'w - y_i))`` where the epsilon-insensitive loss is
    made quadratic over a band of width ``delta`` past the tube edge.
    """
    def objective(w):
        r = A @ w - y
        u = np.abs(r) - eps
        quad = (u > 0) & (u <= delta)
        lin = u > delta
        loss = np.sum(u[quad] ** 2) / (2 * delta) + np.sum(u[lin] - delta / 2)
        psi = np.where(lin, 1.0, np.where(quad, u / delta, 0.0)) * np.sign(r)
        return 0.5 * w @ w + C * loss, w + C * (A.T @ psi), quad

    f, g, quad = objective(w)
    for _ in range(max_newton):
        Aq = A[quad]
        H = np.eye(A.shape[1]) + (C / delta) * (Aq.T @ Aq)
        d = -np.linalg.solve(H, g)
        dec = -(g @ d)
        if dec < 1e-14 * max(1.0, abs(f)):
            break
        t = 1.0
        while t > 1e-12:
            f_new, g_new, quad_new = objective(w + t * d)
            if f_new <= f - 1e-4 * t * dec:
                break
            t *= 0.5
        w = w + t * d
        f, g, quad = f_new, g_new, quad_new
    return w


def svr_solve(A, y, C=1.0, eps=0.1, tol=1e-6, max_iter=100_000):
    """Exact linear-kernel epsilon-SVR without bias term.

    The primal weights satisfy ``w = A' beta`` where ``beta`` solves the dual
    ``min 1/2 b'AA'b - y'b + eps*|b|_1`` over ``-C <= b <= C``. The solver
    runs Newton's method on a smoothed primal, shrinking the smoothing band
    by 10x per stage, and after each stage reads the active set off the
    residuals and solves the tube-edge block exactly. It stops once the
    dual projected-gradient (KKT) violation is below ``tol``; ``max_iter``
    caps the number of Newton steps overall.

    Returns ``(w, beta, stages)``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = A.shape
    scale = max(1.0, float(np.max(np.abs(y))) if n else 1.0)
    delta = scale
    w = np.zeros(m)
    viol = np.inf
    budget = max_iter
    for stage in range(1, 40):
        w = _smoothed_primal_newton(A, y, C, eps, delta, w, max_newton=min(100, budget))
        budget -= 100
        r = A @ w - y
        for band in (delta, 1e-9 * scale):
            beta = _dual_from_active_set(A, y, r, C, eps, band)
            w_exact = A.T @ beta
            viol = float(np.max(_svr_violation(beta, A @ w_exact - y, C, eps), initial=0.0))
            if viol < tol:
                return w_exact, beta, stage
        if budget <= 0:
            break
        delta *= 0.1
    raise SVRConvergenceError(
        f"SVR did not reach KKT tolerance {tol} (max violation {viol:.3g}, n={n}, C={C}, eps={eps})")


def svr_fit(model: BasisModel, data: Dataset, C=1.0, epsilon=0.1, tol=1e-6,
            max_iter=100_000) -> ParametricFitReport:
    """Support vector regression with the basis map as (linear) feature kernel."""
    if C <= 0 or epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    A, y = stacked_regressor(model, data.inputs, data.targets)
    rank = np.linalg.matrix_rank(A) if np.any(A) else 0
    w, _, sweeps = svr_solve(A, y, C, epsilon, tol, max_iter)
    return _report(model, data, w, rank, degenerate=rank == 0, iterations=sweeps)


def parametric_predict(report: ParametricFitReport, model: BasisModel, inputs) -> Prediction:
    return Prediction(model.predict(inputs, report.coefficients))
