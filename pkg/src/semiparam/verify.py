"""Built-in oracle checks: analytic gradients, dynamics consistency and conservation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bnn import BayesianNetwork
from .core import StandardScaler
from .gp import negative_log_marginal_likelihood
from .optim import finite_diff_gradient
from .simdyn import (MismatchConfig, RobotParams, coriolis_matrix, inverse_dynamics,
                     kinetic_energy, mass_matrix, mass_matrix_dot, random_states, regressor,
                     simulate_rollout)


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value < self.threshold)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3g} (< {self.threshold:g})"


def _rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


def check_gp_gradient(n_problems=50, n=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_problems):
        d = int(rng.integers(1, 4))
        X = rng.uniform(-2, 2, (n, d))
        Y = np.sin(X.sum(1, keepdims=True)) + 0.1 * rng.standard_normal((n, 1))
        p = np.concatenate([rng.normal(0, 0.5, 1), rng.normal(0, 0.5, d), rng.normal(-2, 0.5, 1)])
        ev = negative_log_marginal_likelihood(p, X, Y)
        fd = finite_diff_gradient(lambda q: negative_log_marginal_likelihood(q, X, Y).value, p, 1e-5)
        worst = max(worst, _rel_err(ev.gradient, fd))
    return CheckResult("GP marginal-likelihood gradient vs finite differences", worst, 1e-5)


def check_bnn_gradient(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 1))
    Y = np.sin(X)
    net = BayesianNetwork(1, 1, hidden=(2,), seed=seed)
    net.scaler = StandardScaler.fit(X)
    net.sigma_obs2 = np.array([0.25])
    p = np.concatenate([net.mu + rng.normal(0, 0.5, net.n_params),
                        net.rho + rng.normal(0, 0.5, net.n_params)])
    eps = rng.standard_normal(net.n_params)
    ev = net.elbo_loss(p, X, Y, 20, eps=eps)
    fd = finite_diff_gradient(lambda q: net.elbo_loss(q, X, Y, 20, eps=eps).value, p, 1e-6)
    return CheckResult("BNN ELBO gradient (1-2-1 net, frozen noise)", _rel_err(ev.gradient, fd), 1e-4)


def check_regressor(n=1000, seed=0):
    robot = RobotParams()
    q, qd, qdd = random_states(n, seed)
    tau = inverse_dynamics(robot, q, qd, qdd)
    tau_r = regressor(q, qd, qdd, robot.lengths, robot.gravity) @ robot.raw_parameters()
    return CheckResult("regressor vs closed-form inverse dynamics (max abs)",
                       float(np.max(np.abs(tau - tau_r))), 1e-10)


def check_mass_matrix(n=1000, seed=1):
    robot = RobotParams()
    q, qd, _ = random_states(n, seed)
    M = mass_matrix(robot, q)
    asym = float(np.max(np.abs(M - np.swapaxes(M, -1, -2))))
    min_eig = float(np.min(np.linalg.eigvalsh(M)))
    N = mass_matrix_dot(robot, q, qd) - 2 * coriolis_matrix(robot, q, qd)
    skew = float(np.max(np.abs(N + np.swapaxes(N, -1, -2))))
    return [CheckResult("M(q) symmetry residual", asym, 1e-12),
            CheckResult("M(q) positive definite (negated min eigenvalue)", -min_eig, 0.0),
            CheckResult("Mdot - 2C skew-symmetry residual", skew, 1e-10)]


def check_energy(duration=10.0):
    robot = RobotParams().without_friction().with_gravity(0.0)
    rec = simulate_rollout(robot, MismatchConfig(mode="none"), duration=duration, passive=True,
                           q0=np.array([0.3, -0.5, 0.8]), qd0=np.array([1.0, -0.5, 0.7]))
    e = kinetic_energy(robot, rec.q, rec.qd)
    return CheckResult("passive energy drift over 10 s (relative)",
                       float(np.max(np.abs(e - e[0])) / e[0]), 1e-6)


def run_all():
    checks = [check_gp_gradient(), check_bnn_gradient(), check_regressor()]
    checks += check_mass_matrix()
    checks.append(check_energy())
    return checks
