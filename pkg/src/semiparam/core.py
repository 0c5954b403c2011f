"""Shared data types, scaling and evaluation metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SPLIT_TAGS = ("train", "interp_test", "extrap_test", "test")


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Dataset:
    """Input/target matrices, one row per sample."""

    inputs: np.ndarray
    targets: np.ndarray
    tag: str = "train"
    name: str = ""

    def __post_init__(self):
        x = _as_2d(self.inputs, "inputs")
        y = _as_2d(self.targets, "targets")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"row mismatch: {x.shape[0]} inputs vs {y.shape[0]} targets")
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        if self.tag not in SPLIT_TAGS:
            raise ValueError(f"unknown split tag {self.tag!r}")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def d_in(self):
        return self.inputs.shape[1]

    @property
    def d_out(self):
        return self.targets.shape[1]

    def to_csv(self, path):
        header = [f"x{i}" for i in range(self.d_in)] + [f"y{i}" for i in range(self.d_out)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in np.hstack([self.inputs, self.targets]):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, tag="train", name=""):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        ycols = [i for i, h in enumerate(header) if h.startswith("y")]
        if not xcols or not ycols or len(xcols) + len(ycols) != len(header):
            raise ValueError(f"{path}: header must be x0..,y0..; got {header}")
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
        return cls(data[:, xcols], data[:, ycols], tag=tag, name=name)


class BasisModel:
    """Linear-in-parameters model ``y_i = phi_i(x)^T theta``.

    ``features`` maps an (N, D_in) input matrix to an (N, D_out, M) array
    holding the basis vector of every output dimension.
    """

    def __init__(self, features: Callable[[np.ndarray], np.ndarray], n_coef: int,
                 d_out: int = 1, coefficients=None, name: str = ""):
        self._features = features
        self.n_coef = int(n_coef)
        self.d_out = int(d_out)
        self.name = name
        if coefficients is None:
            coefficients = np.zeros(self.n_coef)
        self.coefficients = np.asarray(coefficients, dtype=float).copy()

    def features(self, inputs) -> np.ndarray:
        x = _as_2d(inputs, "inputs")
        phi = np.asarray(self._features(x), dtype=float)
        if phi.ndim == 2:
            phi = phi[:, None, :]
        if phi.shape != (x.shape[0], self.d_out, self.n_coef):
            raise ValueError(
                f"basis returned shape {phi.shape}, expected {(x.shape[0], self.d_out, self.n_coef)}")
        return phi

    def predict(self, inputs, coefficients=None) -> np.ndarray:
        theta = self.coefficients if coefficients is None else np.asarray(coefficients, dtype=float)
        if theta.shape != (self.n_coef,):
            raise ValueError(f"coefficient vector has shape {theta.shape}, basis expects ({self.n_coef},)")
        return self.features(inputs) @ theta

    def with_coefficients(self, coefficients) -> "BasisModel":
        return BasisModel(self._features, self.n_coef, self.d_out, coefficients, self.name)

    def output(self, i) -> "BasisModel":
        """Single-output view of output dimension ``i``."""
        feats = self._features

        def sub(x):
            phi = np.asarray(feats(x), dtype=float)
            if phi.ndim == 2:
                return phi
            return phi[:, i, :]

        return BasisModel(sub, self.n_coef, 1, self.coefficients, f"{self.name}[{i}]")


def basis_predict(model: BasisModel, x) -> np.ndarray:
    """Evaluate the model at a single input vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return model.predict(x[None, :])[0]


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    variance: Optional[np.ndarray] = None

    def __post_init__(self):
        mean = _as_2d(self.mean, "mean")
        object.__setattr__(self, "mean", mean)
        if self.variance is not None:
            var = _as_2d(self.variance, "variance")
            if var.shape != mean.shape:
                raise ValueError("variance shape must match mean shape")
            if np.any(~(var > 0)):
                raise ValueError("predictive variances must be positive")
            object.__setattr__(self, "variance", var)


def rmse(pred, truth) -> np.ndarray:
    """Root mean squared error per output dimension."""
    mean = pred.mean if isinstance(pred, Prediction) else _as_2d(pred, "pred")
    truth = _as_2d(truth, "truth")
    if mean.shape != truth.shape:
        raise ValueError(f"shape mismatch {mean.shape} vs {truth.shape}")
    if truth.shape[0] == 0:
        raise ValueError("rmse of an empty dataset")
    return np.sqrt(np.mean((mean - truth) ** 2, axis=0))


def pooled_rmse(pred, truth) -> float:
    mean = pred.mean if isinstance(pred, Prediction) else _as_2d(pred, "pred")
    truth = _as_2d(truth, "truth")
    return float(np.sqrt(np.mean((mean - truth) ** 2)))


def mean_nllh(pred: Prediction, truth):
    """Mean negative log predictive density per output dimension.

    Returns ``None`` when the prediction carries no variance.
    """
    if pred.variance is None:
        return None
    truth = _as_2d(truth, "truth")
    if truth.shape != pred.mean.shape:
        raise ValueError(f"shape mismatch {pred.mean.shape} vs {truth.shape}")
    var = pred.variance
    nll = 0.5 * np.log(2 * np.pi * var) + (truth - pred.mean) ** 2 / (2 * var)
    return nll.mean(axis=0)


@dataclass(frozen=True)
class StandardScaler:
    mean: np.ndarray
    scale: np.ndarray = field(default=None)

    @classmethod
    def fit(cls, data) -> "StandardScaler":
        x = _as_2d(data, "data")
        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        return cls(mu, sd)

    def apply(self, data) -> np.ndarray:
        return (_as_2d(data, "data") - self.mean) / self.scale

    def inverse(self, data) -> np.ndarray:
        return _as_2d(data, "data") * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], float), np.asarray(d["scale"], float))


def scaler_fit(data) -> StandardScaler:
    return StandardScaler.fit(data)


def scaler_apply(scaler: StandardScaler, data) -> np.ndarray:
    return scaler.apply(data)
