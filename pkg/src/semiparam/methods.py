"""Registry of benchmark methods: construction, fitting and serialization by id."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bnn import BayesianNetwork
from .compose import SemiParametricComposite
from .core import Prediction
from .gp import MultiOutputGp
from .parametric import lls_fit, svr_fit
from .scenarios import ScenarioData

METHOD_IDS = ("LLS", "SVR", "GP", "BNN", "SPGP", "SPGP_from_zeros", "SPGP_from_ones", "SPGP_SepKer",
              "GP_SepKer", "BaMbANN", "LLS-GP", "LLS-BNN", "SVR-GP", "SVR-BNN", "it-LLS-GP",
              "it-LLS-BNN", "it-SVR-GP", "it-SVR-BNN")


@dataclass(frozen=True)
class MethodSettings:
    """Per-method knobs; ``None`` means the scenario default."""

    gp_max_iters: int = 1000
    gp_grad_tol: float = 1e-6
    bnn_epochs: Optional[int] = None
    bnn_width: Optional[int] = None
    bnn_batch_size: int = 128
    bnn_lr: float = 1e-3
    bnn_sigma_obs_factor: float = 0.05
    svr_C: float = 1.0
    svr_epsilon: float = 0.1
    iterations: int = 3
    spgp_init: Optional[tuple] = None

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"unknown method setting(s): {unknown}")
        d = dict(d)
        if d.get("spgp_init") is not None:
            d["spgp_init"] = tuple(d["spgp_init"])
        return cls(**d)


@dataclass
class FittedMethod:
    method: str
    predict: Callable[[np.ndarray], Prediction]
    coefficients: Optional[np.ndarray]
    to_dict: Callable[[], dict]


def _gp_kwargs(s: MethodSettings):
    return {"max_iters": s.gp_max_iters, "grad_tol": s.gp_grad_tol}


def _bnn(scn: ScenarioData, s: MethodSettings, seed, basis=None, theta_init=None):
    width = s.bnn_width or scn.bnn_width
    train = scn.train
    std = train.targets.std(0)
    std = np.where(std > 0, std, 1.0)
    return BayesianNetwork(train.d_in, train.d_out, (width,) * 3, basis, theta_init,
                           sigma_obs2=(s.bnn_sigma_obs_factor * std) ** 2,
                           epochs=s.bnn_epochs or scn.bnn_epochs, batch_size=s.bnn_batch_size,
                           lr=s.bnn_lr, seed=seed)


def _learner_factory(kind, scn, s, seed):
    if kind == "GP":
        return lambda: MultiOutputGp(None, "shared", **_gp_kwargs(s))
    return lambda: _bnn(scn, s, seed)


def _parametric_kwargs(kind, s):
    return {"C": s.svr_C, "epsilon": s.svr_epsilon} if kind == "SVR" else {}


def fit_method(method: str, scn: ScenarioData, seed: int,
               settings: MethodSettings = MethodSettings()) -> FittedMethod:
    if method not in METHOD_IDS:
        raise ValueError(f"unknown method {method!r}")
    s = settings
    train = scn.train
    basis = scn.basis

    if method in ("LLS", "SVR"):
        rep = lls_fit(basis, train) if method == "LLS" else svr_fit(basis, train, s.svr_C, s.svr_epsilon)
        theta = rep.coefficients
        return FittedMethod(method, lambda X: Prediction(basis.predict(X, theta)), theta,
                            lambda: {"method": method, "coefficients": theta.tolist()})

    if method in ("GP", "GP_SepKer"):
        gp = MultiOutputGp(None, "separate" if method == "GP_SepKer" else "shared", **_gp_kwargs(s))
        gp.fit(train.inputs, train.targets)
        return FittedMethod(method, gp.predict, None, lambda: {"method": method, **gp.to_dict()})

    if method.startswith("SPGP"):
        init = {"SPGP_from_zeros": np.zeros(basis.n_coef),
                "SPGP_from_ones": np.ones(basis.n_coef)}.get(method)
        if init is None:
            init = np.asarray(s.spgp_init, float) if s.spgp_init is not None else scn.prior
        sharing = "separate" if method == "SPGP_SepKer" else "shared"
        gp = MultiOutputGp(basis.with_coefficients(init), sharing, **_gp_kwargs(s))
        gp.fit(train.inputs, train.targets)
        return FittedMethod(method, gp.predict, np.asarray(gp.mean_coefficients),
                            lambda: {"method": method, **gp.to_dict()})

    if method in ("BNN", "BaMbANN"):
        net = _bnn(scn, s, seed, basis if method == "BaMbANN" else None,
                   scn.prior if method == "BaMbANN" else None)
        net.fit(train.inputs, train.targets)
        return FittedMethod(method, net.predict, net.model_coefficients,
                            lambda: {"method": method, **net.to_dict()})

    iterative = method.startswith("it-")
    para, learner = method.removeprefix("it-").split("-")
    comp = SemiParametricComposite(para, _learner_factory(learner, scn, s, seed),
                                   s.iterations if iterative else 1, _parametric_kwargs(para, s))
    comp.fit(basis, train)

    def to_dict():
        inner = comp.learner.to_dict() if hasattr(comp.learner, "to_dict") else {}
        return {"method": method, "iterations": comp.iterations,
                "coefficients": comp.coefficients.tolist(), "residual_model": inner}

    return FittedMethod(method, comp.predict, comp.coefficients, to_dict)
