"""Planar three-link robot: dynamics, identification regressor and data generation.

Joint angles are relative; link ``i`` points along the absolute angle
``phi_i = q_0 + ... + q_i``. Gravity acts along ``-y`` in the plane of
motion. Per link the raw dynamic parameters are ``ZZ_i = I_i + m_i c_i^2``
(inertia about the joint), ``MX_i = m_i c_i`` and ``m_i``; per joint a
viscous and a smoothed Coulomb friction coefficient follow. The raw vector is
ordered ``[ZZ_0, MX_0, M_0, ZZ_1, ..., M_2, FV_0..FV_2, FC_0..FC_2]``.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import qr

from .core import BasisModel, Dataset

N_LINKS = 3
RAW_NAMES = tuple(f"{p}_{i}" for i in range(N_LINKS) for p in ("ZZ", "MX", "M")) + \
    tuple(f"FV_{i}" for i in range(N_LINKS)) + tuple(f"FC_{i}" for i in range(N_LINKS))
N_RAW = len(RAW_NAMES)
COULOMB_WIDTH = 0.01


class RolloutDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class RobotParams:
    lengths: tuple = (1.0, 0.8, 0.6)
    masses: tuple = (3.0, 2.0, 1.0)
    com: tuple | None = None          # defaults to half the link length
    inertia: tuple | None = None      # about the COM; defaults to m l^2 / 12
    viscous: tuple = (0.5, 0.4, 0.3)
    coulomb: tuple = (0.3, 0.2, 0.1)
    gravity: float = 9.81

    def __post_init__(self):
        if self.com is None:
            object.__setattr__(self, "com", tuple(l / 2 for l in self.lengths))
        if self.inertia is None:
            object.__setattr__(self, "inertia",
                               tuple(m * l * l / 12 for m, l in zip(self.masses, self.lengths)))
        for l, m, c, I in zip(self.lengths, self.masses, self.com, self.inertia):
            if l <= 0 or m <= 0 or not 0 <= c <= l or I < 0:
                raise ValueError("invalid link parameters")

    def raw_parameters(self) -> np.ndarray:
        inertial = []
        for m, c, I in zip(self.masses, self.com, self.inertia):
            inertial += [I + m * c * c, m * c, m]
        return np.array(inertial + list(self.viscous) + list(self.coulomb), dtype=float)

    def without_friction(self):
        return RobotParams(self.lengths, self.masses, self.com, self.inertia,
                           (0.0,) * N_LINKS, (0.0,) * N_LINKS, self.gravity)

    def with_gravity(self, g):
        return RobotParams(self.lengths, self.masses, self.com, self.inertia,
                           self.viscous, self.coulomb, g)


def smooth_sign(v):
    return np.tanh(np.asarray(v) / COULOMB_WIDTH)


# ---------------------------------------------------------------------------
# Closed-form Lagrangian dynamics (vectorized over leading axes)
# ---------------------------------------------------------------------------

def _segments(params: RobotParams, i):
    """Lever arms of link ``i``'s COM along absolute angles ``phi_0..phi_i``."""
    return [params.lengths[j] for j in range(i)] + [params.com[i]]


def mass_matrix(params: RobotParams, q):
    q = np.asarray(q, float)
    phi = np.cumsum(q, axis=-1)
    M = np.zeros(q.shape[:-1] + (N_LINKS, N_LINKS))
    for i in range(N_LINKS):
        r = _segments(params, i)
        m = params.masses[i]
        for a in range(i + 1):
            for b in range(i + 1):
                acc = params.inertia[i]
                for j in range(a, i + 1):
                    for jj in range(b, i + 1):
                        acc = acc + m * r[j] * r[jj] * np.cos(phi[..., j] - phi[..., jj])
                M[..., a, b] += acc
    return M


def mass_matrix_partials(params: RobotParams, q):
    """``dM[..., k, a, b] = d M_ab / d q_k``."""
    q = np.asarray(q, float)
    phi = np.cumsum(q, axis=-1)
    dM = np.zeros(q.shape[:-1] + (N_LINKS, N_LINKS, N_LINKS))
    for i in range(N_LINKS):
        r = _segments(params, i)
        m = params.masses[i]
        for a in range(i + 1):
            for b in range(i + 1):
                for j in range(a, i + 1):
                    for jj in range(b, i + 1):
                        s = -m * r[j] * r[jj] * np.sin(phi[..., j] - phi[..., jj])
                        for k in range(N_LINKS):
                            w = (k <= j) - (k <= jj)
                            if w:
                                dM[..., k, a, b] += w * s
    return dM


def coriolis_matrix(params: RobotParams, q, qd):
    """Coriolis/centrifugal matrix from Christoffel symbols of the first kind."""
    qd = np.asarray(qd, float)
    dM = mass_matrix_partials(params, q)
    # Gamma[k, j, i] = 1/2 (dM_kj/dq_i + dM_ki/dq_j - dM_ij/dq_k)
    d_kj_i = np.moveaxis(dM, -3, -1)                 # [..., k, j, i] = dM_kj/dq_i
    d_ki_j = np.swapaxes(d_kj_i, -1, -2)             # [..., k, j, i] = dM_ki/dq_j
    d_ij_k = np.swapaxes(dM, -1, -2)                 # [..., k, j, i] = dM_ij/dq_k
    gamma = 0.5 * (d_kj_i + d_ki_j - d_ij_k)
    return np.einsum("...kji,...i->...kj", gamma, qd)


def mass_matrix_dot(params: RobotParams, q, qd):
    return np.einsum("...kab,...k->...ab", mass_matrix_partials(params, q), np.asarray(qd, float))


def gravity_vector(params: RobotParams, q):
    q = np.asarray(q, float)
    phi = np.cumsum(q, axis=-1)
    g = np.zeros(q.shape)
    for i in range(N_LINKS):
        r = _segments(params, i)
        for k in range(i + 1):
            for j in range(k, i + 1):
                g[..., k] += params.masses[i] * params.gravity * r[j] * np.cos(phi[..., j])
    return g


def friction_torque(params: RobotParams, qd):
    qd = np.asarray(qd, float)
    return np.asarray(params.viscous) * qd + np.asarray(params.coulomb) * smooth_sign(qd)


def inverse_dynamics(params: RobotParams, q, qd, qdd):
    """``tau = M(q) qdd + C(q, qd) qd + g(q) + friction(qd)``."""
    M = mass_matrix(params, q)
    C = coriolis_matrix(params, q, qd)
    qd = np.asarray(qd, float)
    return (np.einsum("...ab,...b->...a", M, np.asarray(qdd, float))
            + np.einsum("...ab,...b->...a", C, qd)
            + gravity_vector(params, q) + friction_torque(params, qd))


def kinetic_energy(params: RobotParams, q, qd):
    qd = np.asarray(qd, float)
    return 0.5 * np.einsum("...a,...ab,...b->...", qd, mass_matrix(params, q), qd)


# ---------------------------------------------------------------------------
# Identification regressor (Newton-Euler, linear in the raw parameters)
# ---------------------------------------------------------------------------

def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def regressor(q, qd, qdd, lengths=RobotParams.lengths, gravity=RobotParams.gravity):
    """Regressor ``Phi`` with ``tau = Phi @ theta_raw``; shape (..., 3, 15).

    Derived from the Newton-Euler recursion, where gravity enters as an
    upward base acceleration. Only the link lengths and gravity are needed;
    everything else lives in the parameter vector.
    """
    q, qd, qdd = (np.asarray(a, float) for a in (q, qd, qdd))
    lead = q.shape[:-1]
    phi = np.cumsum(q, axis=-1)
    om = np.cumsum(qd, axis=-1)
    al = np.cumsum(qdd, axis=-1)
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)          # (..., 3, 2)
    ep = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    tang = al[..., None] * ep - (om ** 2)[..., None] * e       # per unit length

    # joint origin accelerations
    a = np.zeros(lead + (N_LINKS, 2))
    a[..., 0, 1] = gravity
    for i in range(1, N_LINKS):
        a[..., i, :] = a[..., i - 1, :] + lengths[i - 1] * tang[..., i - 1, :]

    Phi = np.zeros(lead + (N_LINKS, N_RAW))
    for i in range(N_LINKS):
        # own force / moment about joint i for unit ZZ_i, MX_i, m_i
        forces = (np.zeros(lead + (2,)), tang[..., i, :], a[..., i, :])
        moments = (al[..., i], _cross(e[..., i, :], a[..., i, :]), np.zeros(lead))
        for p in range(3):
            col = 3 * i + p
            Phi[..., i, col] = moments[p]
            acc = moments[p]
            for k in range(i - 1, -1, -1):
                acc = acc + lengths[k] * _cross(e[..., k, :], forces[p])
                Phi[..., k, col] = acc
    for i in range(N_LINKS):
        Phi[..., i, 3 * N_LINKS + i] = qd[..., i]
        Phi[..., i, 4 * N_LINKS + i] = smooth_sign(qd[..., i])
    return Phi


@dataclass(frozen=True)
class BaseParameterMap:
    """Reduction of the raw regressor to its identifiable (base) columns.

    ``base = theta[independent] + combination @ theta[dependent]``.
    """

    independent: tuple
    dependent: tuple
    combination: np.ndarray = field(compare=False)
    lengths: tuple = RobotParams.lengths
    gravity: float = RobotParams.gravity

    @property
    def count(self):
        return len(self.independent)

    @property
    def names(self):
        return [RAW_NAMES[i] + "R" if self._regrouped(k) else RAW_NAMES[i]
                for k, i in enumerate(self.independent)]

    def _regrouped(self, k):
        return self.combination.size and np.any(np.abs(self.combination[k]) > 1e-12)

    def coefficients(self, raw):
        raw = np.asarray(raw, float)
        out = raw[list(self.independent)].copy()
        if self.dependent:
            out += self.combination @ raw[list(self.dependent)]
        return out

    def regressor(self, q, qd, qdd):
        return regressor(q, qd, qdd, self.lengths, self.gravity)[..., list(self.independent)]

    def basis_model(self, coefficients=None) -> BasisModel:
        def features(X):
            return self.regressor(X[:, 0:3], X[:, 3:6], X[:, 6:9])
        return BasisModel(features, self.count, N_LINKS, coefficients, "simdyn_base")


def base_param_reduction(q, qd, qdd, lengths=RobotParams.lengths, gravity=RobotParams.gravity,
                         rtol=1e-9) -> BaseParameterMap:
    """Identify independent regressor columns by QR with column pivoting."""
    Phi = regressor(q, qd, qdd, lengths, gravity).reshape(-1, N_RAW)
    _, R, piv = qr(Phi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        raise ValueError("regressor has rank 0")
    rank = int(np.sum(diag > rtol * diag[0]))
    indep = tuple(sorted(int(i) for i in piv[:rank]))
    dep = tuple(sorted(int(i) for i in piv[rank:]))
    if dep:
        comb, *_ = np.linalg.lstsq(Phi[:, list(indep)], Phi[:, list(dep)], rcond=None)
        comb[np.abs(comb) < 1e-10] = 0.0
    else:
        comb = np.zeros((rank, 0))
    return BaseParameterMap(indep, dep, comb, tuple(lengths), gravity)


def random_states(n, seed=0, q_scale=np.pi, qd_scale=3.0, qdd_scale=10.0):
    rng = np.random.default_rng(seed)
    return (rng.uniform(-q_scale, q_scale, (n, N_LINKS)), rng.normal(0, qd_scale, (n, N_LINKS)),
            rng.normal(0, qdd_scale, (n, N_LINKS)))


@functools.lru_cache(maxsize=8)
def default_base_map(lengths=RobotParams.lengths, gravity=RobotParams.gravity, seed=0):
    return base_param_reduction(*random_states(10 * N_RAW, seed), lengths=lengths, gravity=gravity)


# ---------------------------------------------------------------------------
# Model mismatch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MismatchConfig:
    mode: str = "local"           # "local" (Ll) or "global" (Gl = local + ripple)
    zone: tuple = (0.15, 0.25)
    c_loc: float = 100.0
    a1: float = 6.0
    a2: float = 2.0
    h1: int = 2
    h2: int = 8
    gear: float = 30.0

    def __post_init__(self):
        if self.mode not in ("local", "global", "none"):
            raise ValueError(f"unknown mismatch mode {self.mode!r}")
        if self.zone[0] > self.zone[1]:
            raise ValueError("friction zone bounds out of order")


def ripple_torque(cfg: MismatchConfig, q):
    q = np.asarray(q, float)
    return cfg.a1 * np.sin(cfg.h1 * cfg.gear * q) + cfg.a2 * np.sin(cfg.h2 * cfg.gear * q)


def mismatch_torque(cfg: MismatchConfig, q, qd):
    """Additive external torque not captured by the regressor."""
    q = np.asarray(q, float)
    qd = np.asarray(qd, float)
    out = np.zeros(np.broadcast(q, qd).shape)
    if cfg.mode == "none":
        return out
    in_zone = (q[..., 0] >= cfg.zone[0]) & (q[..., 0] <= cfg.zone[1])
    out[..., 0] = np.where(in_zone, -cfg.c_loc * smooth_sign(qd[..., 0]), 0.0)
    if cfg.mode == "global":
        out = out + ripple_torque(cfg, q)
    return out


# ---------------------------------------------------------------------------
# Controller and simulation
# ---------------------------------------------------------------------------

def prior_parameters(truth: RobotParams, seed=0, low=0.8, high=1.2) -> np.ndarray:
    """Controller-internal raw parameters: truth scaled by fixed random factors."""
    rng = np.random.default_rng(seed)
    return truth.raw_parameters() * rng.uniform(low, high, N_RAW)


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 3947.8
    kd: float = 125.7
    amplitudes: tuple = (0.4, 0.2, 0.3)
    f1: tuple = (0.28, 0.52, 0.26)
    f2: tuple = (1.1, 2.3, 2.2)
    offset0: float = 0.0
    prior: tuple | None = None     # raw parameters of the internal model; None -> truth

    def __post_init__(self):
        if self.kp <= 0 or self.kd <= 0:
            raise ValueError("controller gains must be positive")


def desired_trajectory(ctrl: ControllerConfig, t):
    """Two-sinusoid excitation (position, velocity, acceleration), shape (..., 3)."""
    t = np.asarray(t, float)[..., None]
    A = np.asarray(ctrl.amplitudes)
    w1 = 2 * np.pi * np.asarray(ctrl.f1)
    w2 = 2 * np.pi * np.asarray(ctrl.f2)
    q = A * np.sin(w1 * t) + A / 3 * np.sin(w2 * t)
    qd = A * w1 * np.cos(w1 * t) + A / 3 * w2 * np.cos(w2 * t)
    qdd = -A * w1 ** 2 * np.sin(w1 * t) - A / 3 * w2 ** 2 * np.sin(w2 * t)
    q = q + np.array([ctrl.offset0, 0.0, 0.0])
    return q, qd, qdd


class _ScalarDynamics:
    """Pure-float Newton-Euler evaluation for the integration loop."""

    def __init__(self, raw, lengths, gravity):
        raw = [float(v) for v in raw]
        self.zz = raw[0:9:3]
        self.mx = raw[1:9:3]
        self.m = raw[2:9:3]
        self.fv = raw[9:12]
        self.fc = raw[12:15]
        self.l = [float(v) for v in lengths]
        self.g = float(gravity)

    def rnea(self, c, s, qd, qdd, gravity=True, friction=True):
        # c, s: cos/sin of absolute angles
        l, zz, mx, m = self.l, self.zz, self.mx, self.m
        om0 = qd[0]; om1 = om0 + qd[1]; om2 = om1 + qd[2]
        al0 = qdd[0]; al1 = al0 + qdd[1]; al2 = al1 + qdd[2]
        om = (om0, om1, om2)
        al = (al0, al1, al2)
        ax, ay = 0.0, (self.g if gravity else 0.0)
        acc = []
        for i in range(3):
            acc.append((ax, ay))
            tx = -al[i] * s[i] - om[i] * om[i] * c[i]
            ty = al[i] * c[i] - om[i] * om[i] * s[i]
            if i < 2:
                ax += l[i] * tx
                ay += l[i] * ty
            acc[i] = (acc[i][0], acc[i][1], tx, ty)
        Fx = Fy = N = 0.0
        tau = [0.0, 0.0, 0.0]
        for i in (2, 1, 0):
            axi, ayi, tx, ty = acc[i]
            # moment of the child force about joint i, then own terms
            N = N + l[i] * (c[i] * Fy - s[i] * Fx) if i < 2 else N
            N += zz[i] * al[i] + mx[i] * (c[i] * ayi - s[i] * axi)
            Fx += m[i] * axi + mx[i] * tx
            Fy += m[i] * ayi + mx[i] * ty
            tau[i] = N
        if friction:
            for i in range(3):
                tau[i] += self.fv[i] * qd[i] + self.fc[i] * math.tanh(qd[i] / COULOMB_WIDTH)
        return tau

    @staticmethod
    def trig(q):
        p0 = q[0]; p1 = p0 + q[1]; p2 = p1 + q[2]
        return (math.cos(p0), math.cos(p1), math.cos(p2)), (math.sin(p0), math.sin(p1), math.sin(p2))

    def forward(self, q, qd, tau):
        c, s = self.trig(q)
        h = self.rnea(c, s, qd, (0.0, 0.0, 0.0))
        cols = [self.rnea(c, s, (0.0, 0.0, 0.0), e, gravity=False, friction=False)
                for e in ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))]
        b = [tau[i] - h[i] for i in range(3)]
        return _solve3([[cols[j][i] for j in range(3)] for i in range(3)], b)


def _solve3(A, b):
    (a, bb, c), (d, e, f), (g, h, i) = A
    co0 = e * i - f * h
    co1 = f * g - d * i
    co2 = d * h - e * g
    det = a * co0 + bb * co1 + c * co2
    x0 = (b[0] * co0 + bb * (f * b[2] - b[1] * i) + c * (b[1] * h - e * b[2])) / det
    x1 = (a * (b[1] * i - f * b[2]) + b[0] * co1 + c * (d * b[2] - b[1] * g)) / det
    x2 = (a * (e * b[2] - b[1] * h) + bb * (b[1] * g - d * b[2]) + b[0] * co2) / det
    return [x0, x1, x2]


def _scalar_mismatch(cfg: MismatchConfig, q, qd):
    out = [0.0, 0.0, 0.0]
    if cfg.mode == "none":
        return out
    if cfg.zone[0] <= q[0] <= cfg.zone[1]:
        out[0] = -cfg.c_loc * math.tanh(qd[0] / COULOMB_WIDTH)
    if cfg.mode == "global":
        for i in range(3):
            out[i] += cfg.a1 * math.sin(cfg.h1 * cfg.gear * q[i]) + cfg.a2 * math.sin(cfg.h2 * cfg.gear * q[i])
    return out


@dataclass
class RolloutRecord:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray

    def to_csv(self, path):
        cols = ["t"] + [f"{n}{i}" for n in ("q", "qd", "qdd", "tau") for i in range(N_LINKS)]
        data = np.column_stack([self.t, self.q, self.qd, self.qdd, self.tau])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in data:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return cls(data[:, 0], data[:, 1:4], data[:, 4:7], data[:, 7:10], data[:, 10:13])


def simulate_rollout(robot: RobotParams = RobotParams(), mismatch: MismatchConfig = MismatchConfig(),
                     ctrl: ControllerConfig = ControllerConfig(), duration=100.0, dt=1e-3,
                     passive=False, q0=None, qd0=None) -> RolloutRecord:
    """Simulate the robot under inverse-dynamics control with RK4.

    The commanded torque is computed from the clean state at every step and
    held constant over the step. With ``passive=True`` the torque is zero and
    the initial state comes from ``q0``/``qd0``.
    """
    plant = _ScalarDynamics(robot.raw_parameters(), robot.lengths, robot.gravity)
    prior = robot.raw_parameters() if ctrl.prior is None else np.asarray(ctrl.prior, float)
    model = _ScalarDynamics(prior, robot.lengths, robot.gravity)
    n_steps = int(round(duration / dt))
    t = np.arange(n_steps + 1) * dt
    qdes, qddes, qdddes = desired_trajectory(ctrl, t)
    qdes, qddes, qdddes = qdes.tolist(), qddes.tolist(), qdddes.tolist()

    if passive:
        q = [float(v) for v in (q0 if q0 is not None else (0.0, 0.0, 0.0))]
        qd = [float(v) for v in (qd0 if qd0 is not None else (0.0, 0.0, 0.0))]
    else:
        q, qd = list(qdes[0]), list(qddes[0])
    kp, kd = ctrl.kp, ctrl.kd

    def accel(q, qd, tau):
        mis = _scalar_mismatch(mismatch, q, qd)
        return plant.forward(q, qd, [tau[i] + mis[i] for i in range(3)])

    Q = np.empty((n_steps + 1, 3))
    QD = np.empty((n_steps + 1, 3))
    QDD = np.empty((n_steps + 1, 3))
    TAU = np.empty((n_steps + 1, 3))
    zero = [0.0, 0.0, 0.0]
    for k in range(n_steps + 1):
        if passive:
            tau = zero
        else:
            ref = [qdddes[k][i] + kp * (qdes[k][i] - q[i]) + kd * (qddes[k][i] - qd[i]) for i in range(3)]
            c, s = model.trig(q)
            tau = model.rnea(c, s, qd, ref)
        a1 = accel(q, qd, tau)
        Q[k] = q
        QD[k] = qd
        QDD[k] = a1
        TAU[k] = tau
        if k == n_steps:
            break
        if abs(qd[0]) > 1e3 or abs(qd[1]) > 1e3 or abs(qd[2]) > 1e3 or not all(map(math.isfinite, qd)):
            raise RolloutDivergedError(f"state diverged at t={t[k]:.3f}s: q={q}, qd={qd}")
        h = dt
        q2 = [q[i] + 0.5 * h * qd[i] for i in range(3)]
        v2 = [qd[i] + 0.5 * h * a1[i] for i in range(3)]
        a2 = accel(q2, v2, tau)
        q3 = [q[i] + 0.5 * h * v2[i] for i in range(3)]
        v3 = [qd[i] + 0.5 * h * a2[i] for i in range(3)]
        a3 = accel(q3, v3, tau)
        q4 = [q[i] + h * v3[i] for i in range(3)]
        v4 = [qd[i] + h * a3[i] for i in range(3)]
        a4 = accel(q4, v4, tau)
        q = [q[i] + h / 6 * (qd[i] + 2 * v2[i] + 2 * v3[i] + v4[i]) for i in range(3)]
        qd = [qd[i] + h / 6 * (a1[i] + 2 * a2[i] + 2 * a3[i] + a4[i]) for i in range(3)]
    return RolloutRecord(t, Q, QD, QDD, TAU)


# ---------------------------------------------------------------------------
# Scenario datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimDynConfig:
    mode: str = "local"
    duration: float = 100.0
    split_time: float = 50.0
    dt: float = 1e-3
    stride: int = 10                 # 1 kHz -> 100 Hz
    sensor_noise: float = 1e-6
    c_loc: float = 100.0
    offsets: tuple = (0.0, 0.3)
    prior_seed: int = 0
    robot: RobotParams = RobotParams()


def central_differences(q, dt):
    """Velocity and acceleration at interior samples (rows 1..N-2)."""
    qd = (q[2:] - q[:-2]) / (2 * dt)
    qdd = (q[2:] - 2 * q[1:-1] + q[:-2]) / dt ** 2
    return qd, qdd


@functools.lru_cache(maxsize=16)
def cached_rollout(robot, mismatch, ctrl, duration, dt):
    return simulate_rollout(robot, mismatch, ctrl, duration, dt)


def scenario_rollouts(cfg: SimDynConfig):
    prior = tuple(prior_parameters(cfg.robot, cfg.prior_seed).tolist())
    mis = MismatchConfig(mode=cfg.mode, c_loc=cfg.c_loc)
    return {off: cached_rollout(cfg.robot, mis, ControllerConfig(offset0=off, prior=prior),
                                cfg.duration, cfg.dt)
            for off in cfg.offsets}


def build_datasets(records, cfg: SimDynConfig, seed=0):
    """Train / interpolation / extrapolation datasets from the offset rollouts."""
    rng = np.random.default_rng(seed)
    base = records[cfg.offsets[0]]
    ext = records[cfg.offsets[1]]
    # one noise realization per rollout; shared by the splits cut from it
    noise_base = rng.uniform(-cfg.sensor_noise, cfg.sensor_noise, base.q.shape)
    noise_ext = rng.uniform(-cfg.sensor_noise, cfg.sensor_noise, ext.q.shape)
    out = {}
    for tag, rec, noise, lo, hi in (("train", base, noise_base, 0.0, cfg.split_time),
                                    ("interp_test", base, noise_base, cfg.split_time, np.inf),
                                    ("extrap_test", ext, noise_ext, cfg.split_time, np.inf)):
        noisy = rec.q + noise
        qd, qdd = central_differences(noisy, cfg.dt)
        idx = np.arange(1, rec.q.shape[0] - 1)      # samples with both neighbours
        t = idx * cfg.dt
        sel = (idx % cfg.stride == 0) & (t >= lo - 1e-9) & (t < hi - 1e-9)
        inputs = np.hstack([noisy[idx][sel], qd[sel], qdd[sel]])
        out[tag] = Dataset(inputs, rec.tau[idx][sel], tag=tag, name=f"simdyn_{cfg.mode}_{tag}")
    return out


def simdyn_generate(cfg: SimDynConfig = SimDynConfig(), seed=0):
    """Datasets, base-parameter basis model and prior coefficients for one scenario."""
    records = scenario_rollouts(cfg)
    splits = build_datasets(records, cfg, seed)
    bmap = default_base_map(cfg.robot.lengths, cfg.robot.gravity)
    prior = bmap.coefficients(prior_parameters(cfg.robot, cfg.prior_seed))
    truth = bmap.coefficients(cfg.robot.raw_parameters())
    return splits, bmap.basis_model(), {"prior": prior, "truth": truth, "base_map": bmap}
