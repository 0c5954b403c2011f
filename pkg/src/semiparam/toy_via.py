"""Toy 1-D scenario and variable impedance actuator (VIA) scenario data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BasisModel, Dataset

# ---------------------------------------------------------------------------
# Toy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToyConfig:
    theta: tuple = (2.0, -1.5, 3.0, 2.4)
    noise_std: float = 0.5
    n_train: int = 400
    n_test: int = 400
    train_range: tuple = (0.0, 12.0)
    extrap_ranges: tuple = ((-4.0, 0.0), (12.0, 16.0))
    dev_center: float = 2.5
    dev_amplitude: float = 6.0
    dev_width: float = 0.4
    outlier_fraction: float = 0.0
    outlier_shift: float = 50.0

    def __post_init__(self):
        lo, hi = self.train_range
        if not lo < hi or any(not a < b for a, b in self.extrap_ranges):
            raise ValueError("intervals must be well ordered")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def toy_features(X):
    x = np.asarray(X, float)[:, 0]
    return np.stack([np.sin(2 * x), x, np.ones_like(x), 0.09 * x ** 2], axis=-1)[:, None, :]


def toy_basis(coefficients=None) -> BasisModel:
    return BasisModel(toy_features, 4, 1, coefficients, "toy")


def toy_deviation(cfg: ToyConfig, x):
    x = np.asarray(x, float)
    return cfg.dev_amplitude * np.exp(-(x - cfg.dev_center) ** 2 / (2 * cfg.dev_width ** 2))


def toy_function(cfg: ToyConfig, x):
    """Noise-free data-generating function (model plus local deviation)."""
    x = np.asarray(x, float)
    return toy_features(x[:, None])[:, 0, :] @ np.asarray(cfg.theta) + toy_deviation(cfg, x)


def toy_generate(cfg: ToyConfig = ToyConfig(), seed=0):
    """Training, interpolation-test and extrapolation-test sets plus the toy basis.

    Outliers (``outlier_fraction`` > 0) are injected into the training
    targets only.
    """
    rng = np.random.default_rng(seed)
    lo, hi = cfg.train_range
    x_tr = rng.uniform(lo, hi, cfg.n_train)
    x_in = rng.uniform(lo, hi, cfg.n_test)
    which = rng.integers(0, len(cfg.extrap_ranges), cfg.n_test)
    bounds = np.asarray(cfg.extrap_ranges)[which]
    x_ex = rng.uniform(bounds[:, 0], bounds[:, 1])

    def observe(x):
        return toy_function(cfg, x) + rng.normal(0.0, cfg.noise_std, x.shape) if cfg.noise_std > 0 \
            else toy_function(cfg, x)

    y_tr, y_in, y_ex = observe(x_tr), observe(x_in), observe(x_ex)
    if cfg.outlier_fraction > 0:
        n_out = int(round(cfg.outlier_fraction * cfg.n_train))
        idx = rng.choice(cfg.n_train, n_out, replace=False)
        y_tr = y_tr.copy()
        y_tr[idx] += cfg.outlier_shift
    splits = {
        "train": Dataset(x_tr, y_tr, "train", "toy_train"),
        "interp_test": Dataset(x_in, y_in, "interp_test", "toy_interp"),
        "extrap_test": Dataset(x_ex, y_ex, "extrap_test", "toy_extrap"),
    }
    return splits, toy_basis()


# ---------------------------------------------------------------------------
# VIA
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ViaSyntheticConfig:
    """Single spring-damper joint driven along a motor chirp.

    Above ``envelope_corner`` Hz the chirp amplitude decays as ``(f_c/f)**2``
    (bounded motor acceleration) and the last ``fade_out`` fraction of the
    run is tapered to rest. Besides the spring/damper torque, the
    transmission carries a Dahl-type stick-slip friction with an internal
    state; its contribution to the measured torque depends on the motion
    history, not only on the current deflection and deflection rate.
    """

    K: float = 400.0
    D: float = 10.0
    J: float = 0.1
    amplitude: float = 0.5
    duration: float = 60.0
    f0: float = 0.0
    f1: float = 3.0
    envelope_corner: float | None = 1.5
    fade_out: float = 0.1
    bearing_coulomb: float = 1.5
    bearing_viscous: float = 0.2
    v_s: float = 0.01
    dahl_force: float = 2.0
    dahl_stiffness: float = 300.0
    noise_std: float = 0.05
    dt: float = 1e-3


@dataclass(frozen=True)
class ViaConfig:
    history: int = 4
    decimation: int = 10           # 1 kHz -> 100 Hz
    split: float = 0.64
    init: tuple = (300.0, 20.0)
    synthetic: ViaSyntheticConfig = field(default_factory=ViaSyntheticConfig)

    def __post_init__(self):
        if self.history < 0 or not 0 < self.split < 1:
            raise ValueError("invalid VIA configuration")


@dataclass
class ViaTelemetry:
    t: np.ndarray
    dq: np.ndarray
    dqd: np.ndarray
    tau: np.ndarray

    def __len__(self):
        return len(self.t)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "dq", "dqd", "tau"])
            for row in zip(self.t, self.dq, self.dqd, self.tau):
                w.writerow([repr(float(v)) for v in row])

    def decimate(self, factor):
        s = slice(None, None, factor)
        return ViaTelemetry(self.t[s], self.dq[s], self.dqd[s], self.tau[s])


def load_via_telemetry(path, mapping=None, decimation=1) -> ViaTelemetry:
    """Read telemetry CSV; ``mapping`` (dict or JSON sidecar path) renames/scales columns.

    Sidecar format: ``{"columns": {"t": "<src>", "dq": ..., "dqd": ..., "tau": ...},
    "scales": {"dq": 1.0, ...}}``.
    """
    if isinstance(mapping, (str, Path)):
        mapping = json.loads(Path(mapping).read_text(encoding="utf-8"))
    mapping = mapping or {}
    cols = {k: mapping.get("columns", {}).get(k, k) for k in ("t", "dq", "dqd", "tau")}
    scales = mapping.get("scales", {})
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    missing = [src for src in cols.values() if src not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    data = {k: np.array([float(r[src]) for r in rows]) * float(scales.get(k, 1.0))
            for k, src in cols.items()}
    tel = ViaTelemetry(data["t"], data["dq"], data["dqd"], data["tau"])
    return tel.decimate(decimation) if decimation > 1 else tel


def via_features(X):
    X = np.asarray(X, float)
    return X[:, None, 0:2]


def via_basis(coefficients=None) -> BasisModel:
    """``tau = K*dq + D*dqd`` on the current-step (first two) input columns."""
    return BasisModel(via_features, 2, 1, coefficients, "via")


def chirp(cfg: ViaSyntheticConfig, t):
    """Motor position and velocity of the enveloped linear chirp."""
    t = np.asarray(t, float)
    T = cfg.duration
    rate = (cfg.f1 - cfg.f0) / T
    arg = 2 * np.pi * (cfg.f0 + rate * t / 2) * t
    freq = cfg.f0 + rate * t
    darg = 2 * np.pi * freq
    amp = np.full_like(t, cfg.amplitude)
    damp = np.zeros_like(t)
    if cfg.envelope_corner is not None:
        fe = np.maximum(freq, cfg.envelope_corner)
        fc2 = cfg.envelope_corner ** 2
        amp = cfg.amplitude * fc2 / fe ** 2
        damp = np.where(freq > cfg.envelope_corner, -2 * cfg.amplitude * fc2 * rate / fe ** 3, 0.0)
    if cfg.fade_out > 0:
        width = cfg.fade_out * T
        u = np.clip((t - (T - width)) / width, 0.0, 1.0)
        taper = 0.5 * (1 + np.cos(np.pi * u))
        dtaper = np.where((u > 0) & (u < 1), -0.5 * np.pi / width * np.sin(np.pi * u), 0.0)
        amp, damp = amp * taper, damp * taper + amp * dtaper
    return amp * np.sin(arg), damp * np.sin(arg) + amp * np.cos(arg) * darg


def via_synthetic_generate(seed=0, cfg: ViaSyntheticConfig = ViaSyntheticConfig(),
                           decimation=10) -> ViaTelemetry:
    """Simulate the VIA test-bed at ``1/dt`` and return telemetry decimated by ``decimation``."""
    rng = np.random.default_rng(seed)
    n = int(round(cfg.duration / cfg.dt))
    t = np.arange(n + 1) * cfg.dt
    th, thd = chirp(cfg, t)
    th_mid, thd_mid = chirp(cfg, t[:-1] + cfg.dt / 2)
    th, thd, th_mid, thd_mid = th.tolist(), thd.tolist(), th_mid.tolist(), thd_mid.tolist()
    K, D, J = cfg.K, cfg.D, cfg.J
    Fc, Fv, vs = cfg.bearing_coulomb, cfg.bearing_viscous, cfg.v_s
    Fd, sig = cfg.dahl_force, cfg.dahl_stiffness

    def rhs(q, qd, z, m, md):
        rel = md - qd
        if Fd > 0:
            zd = sig * rel * (1.0 - z / Fd * math.tanh(rel / vs))
        else:
            zd = 0.0
        trans = K * (m - q) + D * rel + z
        qdd = (trans - Fc * math.tanh(qd / vs) - Fv * qd) / J
        return qd, qdd, zd

    q, qd, z = 0.0, 0.0, 0.0
    dq = np.empty(n + 1)
    dqd = np.empty(n + 1)
    tau = np.empty(n + 1)
    h = cfg.dt
    for k in range(n + 1):
        dq[k] = th[k] - q
        dqd[k] = thd[k] - qd
        tau[k] = K * dq[k] + D * dqd[k] + z
        if k == n:
            break
        k1 = rhs(q, qd, z, th[k], thd[k])
        k2 = rhs(q + h / 2 * k1[0], qd + h / 2 * k1[1], z + h / 2 * k1[2], th_mid[k], thd_mid[k])
        k3 = rhs(q + h / 2 * k2[0], qd + h / 2 * k2[1], z + h / 2 * k2[2], th_mid[k], thd_mid[k])
        k4 = rhs(q + h * k3[0], qd + h * k3[1], z + h * k3[2], th[k + 1], thd[k + 1])
        q += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        qd += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        z += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    if cfg.noise_std > 0:
        tau = tau + rng.normal(0.0, cfg.noise_std, tau.shape)
    return ViaTelemetry(t, dq, dqd, tau).decimate(decimation)


def ar_inputs(dq, dqd, history):
    """Rows ``(dq_t, dqd_t, dq_{t-1}, dqd_{t-1}, ..., dq_{t-H}, dqd_{t-H})`` for t >= H."""
    n = len(dq)
    if n < history + 1:
        raise ValueError(f"telemetry of length {n} is shorter than history+1={history + 1}")
    cols = []
    for lag in range(history + 1):
        cols += [dq[history - lag:n - lag], dqd[history - lag:n - lag]]
    return np.column_stack(cols)


def via_build_datasets(cfg: ViaConfig, telemetry: ViaTelemetry):
    """Instantaneous and auto-regressive train/test sets from 100 Hz telemetry.

    The chronological split happens before windowing, so no test sample
    enters a training window.
    """
    H = cfg.history
    n = len(telemetry)
    if n < H + 1:
        raise ValueError(f"telemetry of length {n} is shorter than history+1={H + 1}")
    n_train = int(math.floor(n * cfg.split))
    out = {"instantaneous": {}, "autoregressive": {}}
    for tag, sl in (("train", slice(0, n_train)), ("test", slice(n_train, n))):
        dq, dqd, tau = telemetry.dq[sl], telemetry.dqd[sl], telemetry.tau[sl]
        out["instantaneous"][tag] = Dataset(np.column_stack([dq, dqd]), tau, tag, f"via_instant_{tag}")
        out["autoregressive"][tag] = Dataset(ar_inputs(dq, dqd, H), tau[H:], tag, f"via_ar_{tag}")
    return out


def via_generate(cfg: ViaConfig = ViaConfig(), seed=0, telemetry: ViaTelemetry | None = None):
    """Both VIA settings; synthesizes telemetry unless real telemetry is given."""
    if telemetry is None:
        telemetry = via_synthetic_generate(seed, cfg.synthetic, cfg.decimation)
    return via_build_datasets(cfg, telemetry), via_basis(np.asarray(cfg.init, float))
