"""Exact Gaussian process regression with an RBF-ARD kernel.

The mean function is either zero or a linear-in-parameters ``BasisModel``
whose coefficients are optimized jointly with the kernel hyperparameters on
the marginal likelihood (the semi-parametric GP).

Hyperparameters are packed as::

    [log signal_variance, log lengthscale_1 .. log lengthscale_D,
     log noise_variance, mean coefficients ...]
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotri

from .core import BasisModel, Prediction
from .optim import ObjectiveEvaluation, lbfgs_minimize

log = logging.getLogger(__name__)

LOG_2PI = np.log(2 * np.pi)


class KernelNotPDError(np.linalg.LinAlgError):
    pass


@dataclass
class RbfArdKernel:
    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if self.variance <= 0 or np.any(self.lengthscales <= 0):
            raise ValueError("kernel variance and lengthscales must be positive")

    def __call__(self, X, Z=None):
        Xs = np.asarray(X, float) / self.lengthscales
        Zs = Xs if Z is None else np.asarray(Z, float) / self.lengthscales
        return self.variance * np.exp(-0.5 * _sqdist(Xs, Zs))


def _sqdist(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


def kernel_eval(k: RbfArdKernel, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, float))
    x2 = np.atleast_1d(np.asarray(x2, float))
    return float(k.variance * np.exp(-0.5 * np.sum(((x - x2) / k.lengthscales) ** 2)))


def jittered_cholesky(K, start=1e-10, stop=1e-4):
    """Lower Cholesky factor of ``K + jitter*I``.

    The jitter starts at ``start * trace(K)/N`` and grows tenfold up to
    ``stop * trace(K)/N``.
    """
    n = K.shape[0]
    level = np.trace(K) / n
    rel = start
    while rel <= stop * (1 + 1e-9):
        try:
            return np.linalg.cholesky(K + (rel * level) * np.eye(n))
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise KernelNotPDError("kernel matrix not PD")


def unpack(params, d_in):
    params = np.asarray(params, float)
    with np.errstate(over="ignore"):
        # an infinite lengthscale switches its input dimension off
        sf2 = np.exp(params[0])
        ell = np.exp(params[1:1 + d_in])
        sn2 = np.exp(params[1 + d_in])
    theta = params[2 + d_in:]
    return sf2, ell, sn2, theta


def pack(sf2, ell, sn2, theta=()):
    return np.concatenate([[np.log(sf2)], np.log(np.atleast_1d(ell)), [np.log(sn2)],
                           np.asarray(theta, float).ravel()])


def negative_log_marginal_likelihood(params, X, Y, phi=None) -> ObjectiveEvaluation:
    """Negative log marginal likelihood and its gradient w.r.t. ``params``.

    ``Y`` may hold several columns; they share one kernel, one noise level and
    one coefficient vector and their objectives are summed. ``phi`` is the
    (N, P, M) basis array of the mean function, or ``None`` for a zero mean.
    """
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d_in = X.shape
    n_out = Y.shape[1]
    sf2, ell, sn2, theta = unpack(params, d_in)

    R = Y if phi is None else Y - phi @ theta
    Xs = X / ell
    Kf = sf2 * np.exp(-0.5 * _sqdist(Xs, Xs))
    Ky = Kf + sn2 * np.eye(n)
    L = jittered_cholesky(Ky)
    alpha = cho_solve((L, True), R)

    value = 0.5 * np.sum(R * alpha) + n_out * np.sum(np.log(np.diag(L))) + 0.5 * n * n_out * LOG_2PI

    Kinv, info = dpotri(L, lower=1)
    if info != 0:
        raise KernelNotPDError("kernel matrix not PD")
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    Q = n_out * Kinv - alpha @ alpha.T
    W = Q * Kf

    grad = np.empty(np.size(params))
    grad[0] = 0.5 * W.sum()
    # sum_ij W_ij (xs_i - xs_j)^2 per dimension, using symmetry of W
    row = W.sum(1)
    grad[1:1 + d_in] = 0.5 * (2.0 * (row @ (Xs * Xs)) - 2.0 * np.einsum("id,id->d", Xs, W @ Xs))
    grad[1 + d_in] = 0.5 * sn2 * np.trace(Q)
    if phi is not None:
        grad[2 + d_in:] = -np.einsum("npm,np->m", phi, alpha)
    return ObjectiveEvaluation(float(value), grad)


def _guarded_nlml(params, X, Y, phi):
    """Objective for the optimizer: +inf (rejected step) where the kernel degenerates."""
    try:
        with np.errstate(all="ignore"):
            ev = negative_log_marginal_likelihood(params, X, Y, phi)
    except (np.linalg.LinAlgError, ValueError):
        return ObjectiveEvaluation(np.inf, np.full(np.size(params), np.nan))
    if not np.isfinite(ev.value) or not np.all(np.isfinite(ev.gradient)):
        return ObjectiveEvaluation(np.inf, np.full(np.size(params), np.nan))
    return ev


class GaussianProcess:
    """Exact GP with RBF-ARD kernel and optional parametric mean.

    Multi-column targets share every parameter (kernel, noise and mean
    coefficients); ``MultiOutputGp`` offers per-output parameters.
    """

    def __init__(self, basis: BasisModel | None = None, mean_init=None,
                 kernel_init=1.0, noise_init=1.0, max_iters=1000, grad_tol=1e-6,
                 optimize=True):
        self.basis = basis
        if basis is not None:
            mean_init = basis.coefficients if mean_init is None else mean_init
            self.mean_init = np.asarray(mean_init, float).copy()
        else:
            self.mean_init = np.zeros(0)
        self.kernel_init = kernel_init
        self.noise_init = noise_init
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.optimize = optimize
        self.params = None
        self.status = None

    # -- parameter views -------------------------------------------------
    @property
    def kernel(self) -> RbfArdKernel:
        sf2, ell, _, _ = unpack(self.params, self._d_in)
        return RbfArdKernel(sf2, ell)

    @property
    def noise_variance(self) -> float:
        return float(unpack(self.params, self._d_in)[2])

    @property
    def mean_coefficients(self) -> np.ndarray:
        return unpack(self.params, self._d_in)[3].copy()

    def _phi(self, X):
        return None if self.basis is None else self.basis.features(X)

    def initial_params(self, d_in):
        return pack(self.kernel_init, np.full(d_in, float(self.kernel_init)), self.noise_init,
                    self.mean_init)

    # -- fitting ---------------------------------------------------------
    def fit(self, X, Y, init=None):
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        if Y.ndim == 1:
            Y = Y[:, None]
        self._d_in = X.shape[1]
        phi = self._phi(X)
        x0 = self.initial_params(self._d_in) if init is None else np.asarray(init, float)
        if self.optimize:
            res = lbfgs_minimize(lambda p: _guarded_nlml(p, X, Y, phi), x0,
                                 max_iters=self.max_iters, grad_tol=self.grad_tol)
            self.params, self.status, self.nlml = res.x, res.status, res.value
            log.info("GP fit: %s after %d iterations, nlml=%.6g", res.status, res.iterations, res.value)
        else:
            self.params = x0
            self.status = "fixed"
            self.nlml = negative_log_marginal_likelihood(x0, X, Y, phi).value
        self._condition(X, Y, phi)
        return self

    def set_data(self, X, Y, params):
        """Condition on data with given hyperparameters (no optimization)."""
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        if Y.ndim == 1:
            Y = Y[:, None]
        self._d_in = X.shape[1]
        self.params = np.asarray(params, float)
        self.status = "fixed"
        self._condition(X, Y, self._phi(X))
        return self

    def _condition(self, X, Y, phi):
        sf2, ell, sn2, theta = unpack(self.params, self._d_in)
        R = Y if phi is None else Y - phi @ theta
        K = RbfArdKernel(sf2, ell)(X) + sn2 * np.eye(X.shape[0])
        self._L = jittered_cholesky(K)
        self._alpha = cho_solve((self._L, True), R)
        self._X = X
        self._n_out = Y.shape[1]

    # -- prediction ------------------------------------------------------
    def predict(self, X, chunk=2048) -> Prediction:
        X = np.asarray(X, float)
        sf2, ell, sn2, theta = unpack(self.params, self._d_in)
        kern = RbfArdKernel(sf2, ell)
        means, variances = [], []
        for s in range(0, X.shape[0], chunk):
            Xc = X[s:s + chunk]
            Ks = kern(Xc, self._X)
            mu = Ks @ self._alpha
            if self.basis is not None:
                mu = mu + self.basis.features(Xc) @ theta
            v = solve_triangular(self._L, Ks.T, lower=True)
            var = sf2 - np.einsum("ij,ij->j", v, v) + sn2
            means.append(mu)
            variances.append(np.maximum(var, 1e-300))
        mean = np.vstack(means)
        var = np.concatenate(variances)
        return Prediction(mean, np.repeat(var[:, None], mean.shape[1], axis=1))

    # -- serialization ---------------------------------------------------
    def to_dict(self):
        k = self.kernel
        mean = {"type": "zero", "coefficients": []}
        if self.basis is not None:
            mean = {"type": "basis", "name": self.basis.name,
                    "coefficients": self.mean_coefficients.tolist()}
        return {"kernel": {"variance": float(k.variance), "lengthscales": k.lengthscales.tolist()},
                "noise_variance": self.noise_variance, "mean": mean}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @staticmethod
    def params_from_dict(d):
        return pack(d["kernel"]["variance"], d["kernel"]["lengthscales"], d["noise_variance"],
                    d["mean"].get("coefficients", []))


class MultiOutputGp:
    """GP over several outputs with shared or separate parameters.

    ``shared`` optimizes a single parameter vector against the summed
    objective of all outputs; ``separate`` fits an independent GP (with its
    own kernel, noise and mean coefficients) per output.
    """

    def __init__(self, basis: BasisModel | None = None, sharing="shared", **gp_kwargs):
        if sharing not in ("shared", "separate"):
            raise ValueError(f"unknown sharing mode {sharing!r}")
        self.basis = basis
        self.sharing = sharing
        self.gp_kwargs = gp_kwargs
        self.models = []

    def fit(self, X, Y):
        Y = np.asarray(Y, float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if self.sharing == "shared" or Y.shape[1] == 1:
            self.models = [GaussianProcess(self.basis, **self.gp_kwargs).fit(X, Y)]
        else:
            self.models = []
            for i in range(Y.shape[1]):
                b = None if self.basis is None else self.basis.output(i)
                self.models.append(GaussianProcess(b, **self.gp_kwargs).fit(X, Y[:, i:i + 1]))
        return self

    def predict(self, X) -> Prediction:
        preds = [m.predict(X) for m in self.models]
        if len(preds) == 1:
            return preds[0]
        return Prediction(np.hstack([p.mean for p in preds]), np.hstack([p.variance for p in preds]))

    @property
    def mean_coefficients(self):
        if self.basis is None:
            return None
        return np.stack([m.mean_coefficients for m in self.models]) if len(self.models) > 1 \
            else self.models[0].mean_coefficients

    @property
    def total_nlml(self):
        return float(sum(m.nlml for m in self.models))

    def to_dict(self):
        return {"sharing": self.sharing, "outputs": [m.to_dict() for m in self.models]}
