"""Variational Bayesian feed-forward networks (BNN) and the model-based BaMbANN.

Every weight has a Gaussian posterior ``N(mu, softplus(rho)**2)`` and is
trained by the reparameterization trick with one weight sample per step.
BaMbANN adds a variational parametric path ``phi(x) @ theta`` (raw inputs)
to the dense path (standard-scaled inputs); the two are summed.
"""

from __future__ import annotations

import json
import logging

import numpy as np

from .core import BasisModel, Prediction, StandardScaler
from .optim import ObjectiveEvaluation, adam_update

log = logging.getLogger(__name__)


class BnnDivergenceError(RuntimeError):
    pass


def softplus(x):
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    return np.log(np.expm1(y))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def kl_gaussian(mu_q, sigma_q, mu_p, sigma_p) -> float:
    """Summed KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2))."""
    mu_q, sigma_q, mu_p, sigma_p = (np.asarray(a, float) for a in (mu_q, sigma_q, mu_p, sigma_p))
    if np.any(sigma_q <= 0) or np.any(sigma_p <= 0):
        raise ValueError("standard deviations must be positive")
    return float(np.sum(np.log(sigma_p / sigma_q)
                        + (sigma_q ** 2 + (mu_q - mu_p) ** 2) / (2 * sigma_p ** 2) - 0.5))


class VariationalDenseLayer:
    """Shape bookkeeping for one dense layer inside the flat parameter vector."""

    def __init__(self, fan_in, fan_out, activation="elu"):
        if activation not in ("elu", "linear"):
            raise ValueError(f"unknown activation {activation!r}")
        self.fan_in, self.fan_out, self.activation = fan_in, fan_out, activation

    @property
    def size(self):
        return self.fan_in * self.fan_out + self.fan_out

    def split(self, flat):
        k = self.fan_in * self.fan_out
        return flat[:k].reshape(self.fan_in, self.fan_out), flat[k:k + self.fan_out]


class BayesianNetwork:
    """Plain BNN (``basis=None``) or BaMbANN (with a ``BasisModel`` path).

    ``sigma_obs2`` defaults to ``(0.05*std(y_train))**2`` per output. With
    ``scale_output`` the dense output is multiplied by the fixed per-output
    ``std(y_train)``; by default it is left unscaled so that large outputs
    stay cheaper to reach through the model path.
    """

    def __init__(self, d_in, d_out, hidden=(64, 64, 64), basis: BasisModel | None = None,
                 theta_init=None, sigma_obs2=None, prior_dense_std=0.1, prior_model_std=10.0,
                 init_mu_std=0.05, init_sigma=0.01, epochs=2000, batch_size=128, lr=1e-3,
                 seed=0, scale_output=False):
        self.scale_output = scale_output
        self.d_in, self.d_out = d_in, d_out
        self.hidden = tuple(hidden)
        widths = (d_in,) + self.hidden
        self.layers = [VariationalDenseLayer(a, b, "elu") for a, b in zip(widths[:-1], widths[1:])]
        self.layers.append(VariationalDenseLayer(widths[-1], d_out, "linear"))
        self.n_dense = sum(layer.size for layer in self.layers)
        self.basis = basis
        if basis is not None:
            theta_init = basis.coefficients if theta_init is None else theta_init
            theta_init = np.zeros(basis.n_coef) if theta_init is None else theta_init
            self.theta_init = np.asarray(theta_init, float).copy()
        else:
            self.theta_init = np.zeros(0)
        self.n_params = self.n_dense + self.theta_init.size
        self.sigma_obs2 = None if sigma_obs2 is None else np.broadcast_to(
            np.asarray(sigma_obs2, float), (d_out,)).copy()
        self.prior_dense_std, self.prior_model_std = prior_dense_std, prior_model_std
        self.init_mu_std, self.init_sigma = init_mu_std, init_sigma
        self.epochs, self.batch_size, self.lr, self.seed = epochs, batch_size, lr, seed
        self.scaler = StandardScaler(np.zeros(d_in), np.ones(d_in))
        self.output_scale = np.ones(d_out)
        self.prior_mu = np.concatenate([np.zeros(self.n_dense), self.theta_init])
        self.prior_sigma = np.concatenate([np.full(self.n_dense, prior_dense_std),
                                           np.full(self.theta_init.size, prior_model_std)])
        rng = np.random.default_rng(seed)
        self.mu = np.concatenate([rng.normal(0.0, init_mu_std, self.n_dense), self.theta_init])
        self.rho = np.full(self.n_params, inverse_softplus(init_sigma))
        self.history = []

    # -- forward ---------------------------------------------------------
    def _dense_slices(self, flat):
        out, off = [], 0
        for layer in self.layers:
            out.append(layer.split(flat[off:off + layer.size]))
            off += layer.size
        return out

    def _forward(self, w, Xs, phi):
        """Deterministic forward pass with weights ``w``; returns (output, cache)."""
        acts, pre = [Xs], []
        h = Xs
        for (W, b), layer in zip(self._dense_slices(w), self.layers):
            z = h @ W + b
            pre.append(z)
            h = elu(z) if layer.activation == "elu" else z
            acts.append(h)
        dense = h * self.output_scale
        model = np.zeros_like(dense) if phi is None else phi @ w[self.n_dense:]
        return dense + model, (acts, pre, dense, model)

    def _backward(self, w, cache, phi, g_out):
        """Gradient of ``sum(g_out * output)`` w.r.t. the sampled weights."""
        acts, pre, _, _ = cache
        grad = np.empty_like(w)
        slices = self._dense_slices(w)
        offs = np.cumsum([0] + [layer.size for layer in self.layers])
        g = g_out * self.output_scale
        for i in range(len(self.layers) - 1, -1, -1):
            W, _ = slices[i]
            if self.layers[i].activation == "elu":
                g = g * np.where(pre[i] > 0, 1.0, np.exp(np.minimum(pre[i], 0.0)))
            k = W.size
            grad[offs[i]:offs[i] + k] = (acts[i].T @ g).ravel()
            grad[offs[i] + k:offs[i + 1]] = g.sum(0)
            g = g @ W.T
        if phi is not None:
            grad[self.n_dense:] = np.einsum("npm,np->m", phi, g_out)
        return grad

    def sample_weights(self, rng, eps=None):
        if eps is None:
            eps = rng.standard_normal(self.n_params)
        return self.mu + softplus(self.rho) * eps, eps

    def forward_sample(self, X, rng=None, eps=None, return_parts=False):
        """One posterior sample of the network output at ``X``."""
        X = np.asarray(X, float)
        w, _ = self.sample_weights(rng, eps)
        phi = None if self.basis is None else self.basis.features(X)
        out, cache = self._forward(w, self.scaler.apply(X), phi)
        if return_parts:
            return out, cache[2], cache[3]
        return out

    # -- objective -------------------------------------------------------
    def elbo_loss(self, params, X, Y, n_total=None, rng=None, eps=None) -> ObjectiveEvaluation:
        """Negative ELBO (mini-batch likelihood rescaled to ``n_total``) and its gradient.

        ``params`` is ``concat(mu, rho)``. ``eps`` freezes the weight noise.
        """
        X = np.asarray(X, float)
        Y = np.asarray(Y, float).reshape(X.shape[0], self.d_out)
        n_total = X.shape[0] if n_total is None else n_total
        mu, rho = params[:self.n_params], params[self.n_params:]
        sigma = softplus(rho)
        if eps is None:
            eps = rng.standard_normal(self.n_params)
        w = mu + sigma * eps
        phi = None if self.basis is None else self.basis.features(X)
        out, cache = self._forward(w, self.scaler.apply(X), phi)
        scale = n_total / X.shape[0]
        r = out - Y
        s2 = self.sigma_obs2
        nll = scale * (0.5 * np.sum(r * r / s2) + 0.5 * X.shape[0] * np.sum(np.log(2 * np.pi * s2)))
        ps = self.prior_sigma
        kl = np.sum(np.log(ps / sigma) + (sigma ** 2 + (mu - self.prior_mu) ** 2) / (2 * ps ** 2) - 0.5)
        value = float(nll + kl)
        if not np.isfinite(value):
            bad = np.flatnonzero(~np.isfinite(mu) | ~np.isfinite(rho))
            raise BnnDivergenceError(f"non-finite ELBO; non-finite parameters at {bad[:10].tolist()}")
        gw = self._backward(w, cache, phi, scale * r / s2)
        g_mu = gw + (mu - self.prior_mu) / ps ** 2
        g_sigma = gw * eps - 1.0 / sigma + sigma / ps ** 2
        return ObjectiveEvaluation(value, np.concatenate([g_mu, g_sigma * sigmoid(rho)]))

    # -- training --------------------------------------------------------
    def fit(self, X, Y):
        X = np.asarray(X, float)
        Y = np.asarray(Y, float).reshape(X.shape[0], self.d_out)
        self.scaler = StandardScaler.fit(X)
        std = Y.std(0)
        std = np.where(std > 0, std, 1.0)
        if self.sigma_obs2 is None:
            self.sigma_obs2 = (0.05 * std) ** 2
        self.output_scale = std if self.scale_output else np.ones(self.d_out)
        rng = np.random.default_rng(self.seed)
        params = np.concatenate([self.mu, self.rho])
        m, v = np.zeros_like(params), np.zeros_like(params)
        n = X.shape[0]
        bs = min(self.batch_size, n)
        t = 0
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for s in range(0, n, bs):
                idx = order[s:s + bs]
                ev = self.elbo_loss(params, X[idx], Y[idx], n, rng)
                if ev.value > 1e12:
                    raise BnnDivergenceError(f"ELBO diverged at epoch {epoch}: loss={ev.value:.3g}")
                t += 1
                params = adam_update(params, ev.gradient, m, v, t, self.lr)
                total += ev.value * len(idx) / n
            self.history.append(total)
        self.mu, self.rho = params[:self.n_params].copy(), params[self.n_params:].copy()
        log.info("BNN trained %d epochs, final loss %.6g", self.epochs, self.history[-1] if self.history else np.nan)
        return self

    def predict(self, X, n_samples=30, rng=None) -> Prediction:
        """Sample mean and population variance over ``n_samples`` weight draws."""
        rng = np.random.default_rng(self.seed + 1) if rng is None else rng
        X = np.asarray(X, float)
        phi = None if self.basis is None else self.basis.features(X)
        Xs = self.scaler.apply(X)
        outs = np.stack([self._forward(self.sample_weights(rng)[0], Xs, phi)[0]
                         for _ in range(n_samples)])
        return Prediction(outs.mean(0), np.maximum(outs.var(0), 1e-12))

    # -- views / serialization ---------------------------------------------
    @property
    def sigma(self):
        return softplus(self.rho)

    @property
    def model_coefficients(self):
        return None if self.basis is None else self.mu[self.n_dense:].copy()

    def to_dict(self):
        layers, off = [], 0
        for layer in self.layers:
            sl = slice(off, off + layer.size)
            layers.append({"shape": [layer.fan_in, layer.fan_out], "activation": layer.activation,
                           "mu": self.mu[sl].tolist(), "rho": self.rho[sl].tolist()})
            off += layer.size
        model_path = None
        if self.basis is not None:
            model_path = {"name": self.basis.name, "mu": self.mu[self.n_dense:].tolist(),
                          "rho": self.rho[self.n_dense:].tolist()}
        return {"layers": layers, "model_path": model_path, "scaler": self.scaler.to_dict(),
                "output_scale": self.output_scale.tolist(),
                "sigma_obs2": None if self.sigma_obs2 is None else self.sigma_obs2.tolist()}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def load_dict(self, d):
        self.mu = np.concatenate([np.concatenate([np.asarray(layer["mu"]) for layer in d["layers"]]),
                                  np.asarray(d["model_path"]["mu"]) if d["model_path"] else np.zeros(0)])
        self.rho = np.concatenate([np.concatenate([np.asarray(layer["rho"]) for layer in d["layers"]]),
                                   np.asarray(d["model_path"]["rho"]) if d["model_path"] else np.zeros(0)])
        if self.mu.size != self.n_params:
            raise ValueError("serialized network does not match this architecture")
        self.scaler = StandardScaler.from_dict(d["scaler"])
        self.output_scale = np.asarray(d["output_scale"], float)
        self.sigma_obs2 = None if d["sigma_obs2"] is None else np.asarray(d["sigma_obs2"], float)
        return self


def bnn_train(model: BayesianNetwork, X, Y):
    return model.fit(X, Y)


def bnn_predict(model: BayesianNetwork, X, n_samples=30, rng=None) -> Prediction:
    return model.predict(X, n_samples, rng)
