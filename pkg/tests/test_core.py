import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from semiparam.core import (BasisModel, Dataset, Prediction, StandardScaler, basis_predict,
                            mean_nllh, pooled_rmse, rmse, scaler_apply, scaler_fit)
from semiparam.toy_via import toy_basis

THETA = np.array([2.0, -1.5, 3.0, 2.4])


def test_toy_basis_at_zero():
    assert basis_predict(toy_basis(THETA), [0.0])[0] == pytest.approx(3.0)


def test_toy_basis_at_two():
    # 2 sin 4 + 2.4 * 0.09 * 4
    assert basis_predict(toy_basis(THETA), [2.0])[0] == pytest.approx(-0.6496049906, abs=1e-8)


def test_zero_coefficients_predict_zero():
    x = np.linspace(-5, 5, 11)[:, None]
    assert np.all(toy_basis().predict(x) == 0.0)


def test_basis_shape_is_checked():
    bad = BasisModel(lambda X: np.ones((X.shape[0], 2, 3)), 4, 2)
    with pytest.raises(ValueError, match="expected"):
        bad.features(np.zeros((5, 1)))


def test_coefficient_length_is_checked():
    with pytest.raises(ValueError):
        toy_basis().predict([[1.0]], np.zeros(3))


def test_output_view_selects_one_dimension():
    m = BasisModel(lambda X: np.stack([X, 2 * X], axis=1), 1, 2)
    x = np.arange(3.0)[:, None]
    assert np.allclose(m.output(1).predict(x, [1.0])[:, 0], 2 * x[:, 0])


def test_dataset_validation():
    with pytest.raises(ValueError, match="row mismatch"):
        Dataset(np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(ValueError, match="at least one row"):
        Dataset(np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(ValueError, match="non-finite"):
        Dataset([[np.nan]], [1.0])
    with pytest.raises(ValueError, match="split tag"):
        Dataset([[1.0]], [1.0], tag="validation")


def test_dataset_is_read_only():
    d = Dataset(np.zeros((2, 1)), np.zeros(2))
    with pytest.raises(ValueError):
        d.inputs[0, 0] = 1.0


def test_dataset_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(rng.normal(size=(5, 2)), rng.normal(size=(5, 3)), "extrap_test")
    d.to_csv(tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text()
    assert text.splitlines()[0] == "x0,x1,y0,y1,y2" and "\r" not in text
    back = Dataset.from_csv(tmp_path / "d.csv", tag="extrap_test")
    assert np.array_equal(back.inputs, d.inputs) and np.array_equal(back.targets, d.targets)


def test_rmse_examples():
    assert rmse([0.0, 0.0], [0.0, 0.0])[0] == 0.0
    assert rmse([1.0, -1.0], [0.0, 0.0])[0] == pytest.approx(1.0)
    assert rmse([2.0, 0.0, 0.0, 0.0], [0.0] * 4)[0] == pytest.approx(1.0)


def test_rmse_per_dimension_and_pooled():
    mean = np.array([[1.0, 0.0], [1.0, 2.0]])
    assert np.allclose(rmse(mean, np.zeros((2, 2))), [1.0, np.sqrt(2.0)])
    assert pooled_rmse(mean, np.zeros((2, 2))) == pytest.approx(np.sqrt(6 / 4))


def test_rmse_rejects_empty_and_mismatched():
    with pytest.raises(ValueError):
        rmse(np.zeros((0, 1)), np.zeros((0, 1)))
    with pytest.raises(ValueError):
        rmse(np.zeros((2, 1)), np.zeros((3, 1)))


def test_nllh_examples():
    assert mean_nllh(Prediction([0.0], [1.0]), [0.0])[0] == pytest.approx(0.918938533, abs=1e-9)
    assert mean_nllh(Prediction([1.3], [1 / (2 * np.pi)]), [1.3])[0] == pytest.approx(0.0, abs=1e-12)


def test_nllh_without_variance_is_unavailable():
    assert mean_nllh(Prediction([0.0]), [0.0]) is None


@given(st.floats(0.1, 3.0), st.floats(0.05, 10.0))
def test_nllh_minimized_at_squared_error(err, s2):
    def f(v):
        return mean_nllh(Prediction([0.0], [v]), [err])[0]
    assert f(err ** 2) <= f(s2) + 1e-12


def test_prediction_variance_must_be_positive():
    with pytest.raises(ValueError):
        Prediction([0.0], [0.0])


def test_scaler_examples():
    s = scaler_fit(np.array([[1.0], [1.0], [1.0]]))
    assert s.mean[0] == 1.0 and s.scale[0] == 1.0
    assert np.all(scaler_apply(s, [[1.0], [1.0], [1.0]]) == 0.0)
    s = scaler_fit(np.array([[0.0], [2.0]]))
    assert s.mean[0] == 1.0 and s.scale[0] == 1.0
    assert np.allclose(scaler_apply(s, [[0.0], [2.0]])[:, 0], [-1.0, 1.0])


@settings(max_examples=50)
@given(arrays(np.float64, (6, 3), elements=st.floats(-1e3, 1e3)))
def test_scaler_round_trip(x):
    s = StandardScaler.fit(x)
    assert np.allclose(s.inverse(s.apply(x)), x, atol=1e-12 * (1 + np.abs(x).max()) * 1e3)


def test_scaler_dict_round_trip():
    s = StandardScaler.fit(np.random.default_rng(1).normal(size=(10, 2)))
    t = StandardScaler.from_dict(s.to_dict())
    assert np.array_equal(s.mean, t.mean) and np.array_equal(s.scale, t.scale)
