import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semiparam.core import basis_predict
from semiparam.parametric import lls_fit
from semiparam.toy_via import (ToyConfig, ViaConfig, ViaSyntheticConfig, ViaTelemetry, ar_inputs,
                               chirp, load_via_telemetry, toy_deviation, toy_function, toy_generate,
                               via_basis, via_build_datasets, via_generate, via_synthetic_generate)

QUIET = dict(bearing_coulomb=0.0, bearing_viscous=0.0, dahl_force=0.0)


def test_toy_noise_free_value_at_zero():
    cfg = ToyConfig(noise_std=0.0, dev_amplitude=0.0)
    assert toy_function(cfg, np.array([0.0]))[0] == pytest.approx(3.0, abs=1e-15)


def test_deviation_peaks_at_center():
    cfg = ToyConfig(dev_amplitude=4.2)
    assert toy_deviation(cfg, np.array([2.5]))[0] == pytest.approx(4.2)
    xs = np.linspace(0, 12, 1001)
    assert np.argmax(toy_deviation(cfg, xs)) == np.argmin(np.abs(xs - 2.5))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_toy_sample_ranges_and_sizes(seed):
    s, _ = toy_generate(ToyConfig(), seed)
    assert s["train"].n == 400
    for tag in ("train", "interp_test"):
        x = s[tag].inputs[:, 0]
        assert np.all((x >= 0) & (x <= 12))
    xe = s["extrap_test"].inputs[:, 0]
    assert np.all(((xe >= -4) & (xe < 0)) | ((xe > 12) & (xe <= 16)))


def test_toy_determinism():
    a, _ = toy_generate(ToyConfig(), 7)
    b, _ = toy_generate(ToyConfig(), 7)
    c, _ = toy_generate(ToyConfig(), 8)
    for tag in a:
        assert np.array_equal(a[tag].inputs, b[tag].inputs)
        assert np.array_equal(a[tag].targets, b[tag].targets)
    assert not np.array_equal(a["train"].targets, c["train"].targets)


def test_toy_outliers_only_in_training_targets():
    clean, _ = toy_generate(ToyConfig(), 1)
    dirty, _ = toy_generate(ToyConfig(outlier_fraction=0.05), 1)
    shifted = np.abs(dirty["train"].targets - clean["train"].targets) > 1
    assert shifted.sum() == 20
    assert np.array_equal(dirty["extrap_test"].targets, clean["extrap_test"].targets)


def test_toy_config_validation():
    with pytest.raises(ValueError):
        ToyConfig(train_range=(5.0, 1.0))
    with pytest.raises(ValueError):
        ToyConfig(noise_std=-1.0)


def test_via_basis_examples():
    b = via_basis(np.array([400.0, 10.0]))
    assert basis_predict(b, [0.1, 0.2])[0] == pytest.approx(42.0, abs=1e-12)
    assert basis_predict(b, [0.0, 0.0])[0] == 0.0
    x = np.array([[0.03, -0.4], [0.1, 0.7]])
    assert np.allclose(b.predict(x, [800.0, 20.0]), 2 * b.predict(x, [400.0, 10.0]))


def test_via_basis_ignores_history_columns():
    b = via_basis(np.array([400.0, 10.0]))
    x = np.array([[0.1, 0.2, 9.0, 9.0, -3.0, 1.0]])
    assert b.predict(x)[0, 0] == pytest.approx(42.0)


def _telemetry(n, seed=0):
    rng = np.random.default_rng(seed)
    return ViaTelemetry(np.arange(n) * 0.01, rng.normal(size=n), rng.normal(size=n), rng.normal(size=n))


def test_history_zero_equals_instantaneous():
    tel = _telemetry(50)
    d = via_build_datasets(ViaConfig(history=0), tel)
    for tag in ("train", "test"):
        assert np.array_equal(d["autoregressive"][tag].inputs, d["instantaneous"][tag].inputs)
        assert np.array_equal(d["autoregressive"][tag].targets, d["instantaneous"][tag].targets)


def test_constant_telemetry_rows_repeat():
    n = 30
    tel = ViaTelemetry(np.arange(n) * 0.01, np.full(n, 0.3), np.full(n, -0.2), np.full(n, 1.0))
    rows = via_build_datasets(ViaConfig(), tel)["autoregressive"]["train"].inputs
    assert np.all(rows == np.tile([0.3, -0.2], 5))


@pytest.mark.parametrize("n", [20, 57, 1000])
def test_row_counts(n):
    d = via_build_datasets(ViaConfig(), _telemetry(n))
    n_train = math.floor(n * 0.64)
    assert d["instantaneous"]["train"].n == n_train
    assert d["instantaneous"]["test"].n == n - n_train
    assert d["autoregressive"]["train"].n == n_train - 4
    assert d["autoregressive"]["test"].n == n - n_train - 4


def test_short_telemetry_rejected():
    with pytest.raises(ValueError):
        via_build_datasets(ViaConfig(), _telemetry(4))
    with pytest.raises(ValueError):
        ar_inputs(np.zeros(2), np.zeros(2), 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6), st.integers(0, 10_000))
def test_ar_window_alignment(H, seed):
    tel = _telemetry(40, seed)
    d = via_build_datasets(ViaConfig(history=H), tel)
    ar, inst = d["autoregressive"]["train"], d["instantaneous"]["train"]
    for r in range(ar.n):
        assert np.array_equal(ar.inputs[r, -2:], inst.inputs[r])           # oldest lag = row r
        assert np.array_equal(ar.inputs[r, :2], inst.inputs[r + H])        # current step
        assert ar.targets[r, 0] == inst.targets[r + H, 0]


def test_no_test_sample_in_training_windows():
    n = 100
    tel = ViaTelemetry(np.arange(n) * 0.01, np.arange(n, dtype=float), np.zeros(n), np.zeros(n))
    d = via_build_datasets(ViaConfig(), tel)
    assert d["autoregressive"]["train"].inputs[:, 0::2].max() < math.floor(n * 0.64)
    assert d["autoregressive"]["test"].inputs[:, 0::2].min() >= math.floor(n * 0.64)


def test_chirp_velocity_is_derivative_of_position():
    cfg = ViaSyntheticConfig()
    t = np.linspace(0, cfg.duration, 20001)
    pos, vel = chirp(cfg, t)
    fd = np.gradient(pos, t)
    assert np.max(np.abs(fd[1:-1] - vel[1:-1])) < 1e-3 * np.max(np.abs(vel))


def test_rest_state_produces_zero_torque():
    cfg = ViaSyntheticConfig(amplitude=0.0, noise_std=0.0, duration=2.0, **QUIET)
    tel = via_synthetic_generate(0, cfg)
    assert np.all(tel.tau == 0.0)


@pytest.fixture(scope="module")
def quiet_telemetry():
    return via_synthetic_generate(0, ViaSyntheticConfig(duration=20.0, **QUIET))


def test_friction_free_lls_recovers_stiffness_and_damping(quiet_telemetry):
    d = via_build_datasets(ViaConfig(), quiet_telemetry)["instantaneous"]["train"]
    K, D = lls_fit(via_basis(), d).coefficients
    assert abs(K - 400) < 4 and abs(D - 10) < 0.1


def test_friction_leaves_residual_above_noise_floor():
    both, b = via_generate(ViaConfig(synthetic=ViaSyntheticConfig(duration=20.0)), 0)
    d = both["instantaneous"]["train"]
    rep = lls_fit(b, d)
    assert rep.train_rmse[0] > 5 * 0.05


def test_synthetic_generation_is_seed_deterministic():
    cfg = ViaSyntheticConfig(duration=2.0)
    a, b = via_synthetic_generate(3, cfg), via_synthetic_generate(3, cfg)
    assert np.array_equal(a.tau, b.tau)
    assert len(a) == 201


def test_telemetry_csv_loader_with_mapping(tmp_path):
    tel = _telemetry(25)
    path = tmp_path / "tel.csv"
    tel.to_csv(path)
    back = load_via_telemetry(path)
    assert np.array_equal(back.tau, tel.tau) and np.array_equal(back.dq, tel.dq)

    foreign = tmp_path / "foreign.csv"
    with open(foreign, "w", encoding="utf-8") as fh:
        fh.write("time,defl_mrad,rate,torque\n")
        for row in zip(tel.t, tel.dq * 1000, tel.dqd, tel.tau):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    sidecar = tmp_path / "map.json"
    sidecar.write_text(json.dumps({"columns": {"t": "time", "dq": "defl_mrad", "dqd": "rate",
                                               "tau": "torque"}, "scales": {"dq": 1e-3}}))
    mapped = load_via_telemetry(foreign, str(sidecar), decimation=2)
    assert len(mapped) == 13
    assert np.allclose(mapped.dq, tel.dq[::2], atol=1e-15)
    with pytest.raises(ValueError, match="missing columns"):
        load_via_telemetry(foreign)


def test_via_generate_uses_supplied_telemetry():
    tel = _telemetry(60)
    both, b = via_generate(ViaConfig(), 0, tel)
    assert np.array_equal(both["instantaneous"]["train"].targets[:, 0], tel.tau[:38])
    assert np.array_equal(b.coefficients, [300.0, 20.0])
