"""Sequential and iterative semi-parametric composites.

A composite predicts ``h(x; theta) + g(x)``: a parametric fit ``h`` (LLS or
SVR on a ``BasisModel``) plus a zero-mean non-parametric learner ``g`` (GP
or BNN) trained on the parametric residuals. Iterative variants alternate
between the two, refitting the parametric part on ``y - g(x)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import BasisModel, Dataset, Prediction
from .parametric import ParametricFitReport, lls_fit, svr_fit


class ZeroLearner:
    """Non-parametric learner that always predicts zero (no variance)."""

    def fit(self, X, Y):
        Y = np.asarray(Y, float)
        self.d_out = 1 if Y.ndim == 1 else Y.shape[1]
        return self

    def predict(self, X) -> Prediction:
        return Prediction(np.zeros((np.asarray(X).shape[0], self.d_out)))


PARAMETRIC_FITTERS = {"LLS": lls_fit, "SVR": svr_fit}


class SemiParametricComposite:
    """Parametric fitter id plus a factory for fresh non-parametric learners.

    ``iterations == 1`` is the plain sequential variant; ``> 1`` the
    iterative one. Each round starts a new learner from the factory, so
    hyperparameters are never warm-started.
    """

    def __init__(self, parametric: str, learner_factory: Callable[[], object], iterations=1,
                 parametric_kwargs=None):
        if parametric not in PARAMETRIC_FITTERS:
            raise ValueError(f"unknown parametric fitter {parametric!r}")
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        self.parametric = parametric
        self.learner_factory = learner_factory
        self.iterations = iterations
        self.parametric_kwargs = dict(parametric_kwargs or {})
        self.report: ParametricFitReport | None = None
        self.learner = None
        self.model: BasisModel | None = None
        self.coefficient_history = []

    def _fit_parametric(self, model, X, Y):
        fitter = PARAMETRIC_FITTERS[self.parametric]
        return fitter(model, Dataset(X, Y, "train"), **self.parametric_kwargs)

    def _fit_learner(self, X, residual):
        return self.learner_factory().fit(X, residual)

    def fit(self, model: BasisModel, data: Dataset):
        X = np.asarray(data.inputs)
        Y = np.asarray(data.targets)
        self.model = model
        target = Y
        for _ in range(self.iterations):
            self.report = self._fit_parametric(model, X, target)
            self.coefficient_history.append(self.report.coefficients.copy())
            residual = Y - model.predict(X, self.report.coefficients)
            self.learner = self._fit_learner(X, residual)
            target = Y - self.learner.predict(X).mean
        return self

    def residual_targets(self, data: Dataset):
        """``y - h(x; theta)`` with the current parametric coefficients."""
        return np.asarray(data.targets) - self.model.predict(data.inputs, self.report.coefficients)

    def predict(self, X) -> Prediction:
        para = self.model.predict(X, self.report.coefficients)
        g = self.learner.predict(X)
        return Prediction(para + g.mean, g.variance)

    @property
    def coefficients(self):
        return self.report.coefficients


def fit_sequential(parametric, learner_factory, model, data, **kw) -> SemiParametricComposite:
    return SemiParametricComposite(parametric, learner_factory, 1, **kw).fit(model, data)


def fit_iterative(parametric, learner_factory, model, data, iterations=3, **kw):
    if iterations < 2:
        raise ValueError("iterative composites need iterations >= 2")
    return SemiParametricComposite(parametric, learner_factory, iterations, **kw).fit(model, data)


def composite_predict(composite: SemiParametricComposite, inputs) -> Prediction:
    return composite.predict(inputs)
