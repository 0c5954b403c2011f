import numpy as np
import pytest

from semiparam.optim import (ObjectiveEvaluation, OptimizerError, adam_step_loop, adam_update,
                             finite_diff_gradient, lbfgs_minimize)


def rosenbrock(x):
    v = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
    return ObjectiveEvaluation(v, g)


def test_lbfgs_rosenbrock():
    res = lbfgs_minimize(rosenbrock, [-1.2, 1.0], grad_tol=1e-8, ftol=0.0)
    assert res.status == "converged"
    assert np.allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_lbfgs_quadratic_exact():
    A = np.diag([1.0, 10.0, 100.0])
    b = np.array([1.0, -2.0, 3.0])
    res = lbfgs_minimize(lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b), np.zeros(3),
                         grad_tol=1e-10, ftol=0.0)
    assert np.allclose(res.x, np.linalg.solve(A, b), atol=1e-9)


def test_lbfgs_already_optimal():
    res = lbfgs_minimize(lambda x: (float(x @ x), 2 * x), np.zeros(2))
    assert res.status == "converged" and res.iterations == 0


def test_lbfgs_rejects_non_finite_start():
    with pytest.raises(OptimizerError):
        lbfgs_minimize(lambda x: (np.inf, np.zeros(1)), [0.0])


def test_lbfgs_backtracks_over_infinite_region():
    # objective undefined for x > 1: the line search must shrink the step
    def f(x):
        if x[0] > 1.0:
            return np.inf, np.full(1, np.nan)
        return (x[0] - 0.9) ** 2, np.array([2 * (x[0] - 0.9)])
    res = lbfgs_minimize(lambda x: f(x), [-5.0], grad_tol=1e-9, ftol=0.0)
    assert res.x[0] == pytest.approx(0.9, abs=1e-6)


def test_adam_first_step_moves_by_lr():
    x = np.array([1.0, -2.0])
    m, v = np.zeros(2), np.zeros(2)
    out = adam_update(x, np.array([3.0, -0.5]), m, v, 1, lr=0.01)
    assert np.allclose(out, x - 0.01 * np.sign([3.0, -0.5]), atol=1e-8)


def test_adam_loop_minimizes_quadratic():
    x = adam_step_loop(lambda x, rng: 2 * (x - 3.0), np.zeros(2), 5000, lr=0.01)
    assert np.allclose(x, 3.0, atol=1e-3)


def test_adam_non_finite_gradient_raises():
    with pytest.raises(OptimizerError, match="non-finite"):
        adam_step_loop(lambda x, rng: np.array([np.nan]), [0.0], 3)


def test_finite_difference_gradient():
    g = finite_diff_gradient(lambda x: np.sin(x[0]) * x[1] ** 2, np.array([0.3, 2.0]))
    assert np.allclose(g, [np.cos(0.3) * 4.0, 2 * np.sin(0.3) * 2.0], atol=1e-8)
