"""Uniform access to the benchmark scenarios by id."""

from __future__ import annotations

import dataclasses
import functools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import BasisModel, Dataset
from .simdyn import SimDynConfig, default_base_map, simdyn_generate
from .toy_via import (ToyConfig, ViaConfig, ViaSyntheticConfig, load_via_telemetry, toy_basis,
                      toy_generate, via_basis, via_generate)

SCENARIO_IDS = ("toy", "via_instant", "via_ar", "simdyn_ll", "simdyn_gl")
TEST_SPLITS = {"toy": ("interp_test", "extrap_test"), "via_instant": ("test",), "via_ar": ("test",),
               "simdyn_ll": ("interp_test", "extrap_test"), "simdyn_gl": ("interp_test", "extrap_test")}

_TOY_KEYS = {f.name for f in dataclasses.fields(ToyConfig)}
_VIA_KEYS = {"history", "split", "decimation", "init", "synthetic", "telemetry", "mapping",
             "telemetry_decimation", "max_train"}
_VIA_SYNTH_KEYS = {f.name for f in dataclasses.fields(ViaSyntheticConfig)}
_SIMDYN_KEYS = {"duration", "split_time", "dt", "stride", "sensor_noise", "c_loc", "prior_seed",
                "max_train"}


@dataclass
class ScenarioData:
    scenario: str
    splits: dict
    basis: BasisModel
    prior: np.ndarray            # SPGP / BaMbANN start coefficients
    bnn_width: int
    bnn_epochs: int
    info: dict = dataclasses.field(default_factory=dict)

    @property
    def train(self) -> Dataset:
        return self.splits["train"]

    @property
    def test_splits(self):
        return TEST_SPLITS[self.scenario]


def validate_options(scenario, options):
    """Reject unknown scenario ids and option keys."""
    if scenario not in SCENARIO_IDS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIO_IDS}")
    options = options or {}
    allowed = {"toy": _TOY_KEYS}.get(scenario) or (
        _VIA_KEYS if scenario.startswith("via") else _SIMDYN_KEYS)
    unknown = sorted(set(options) - allowed)
    if unknown:
        raise ValueError(f"unknown option(s) for scenario {scenario}: {unknown}")
    if scenario.startswith("via"):
        bad = sorted(set(options.get("synthetic", {})) - _VIA_SYNTH_KEYS)
        if bad:
            raise ValueError(f"unknown synthetic VIA option(s): {bad}")
    return options


def _tuplify(v):
    return tuple(_tuplify(x) for x in v) if isinstance(v, list) else v


def subsample(data: Dataset, n, seed):
    """Seeded row subset (kept in original order) of at most ``n`` rows."""
    if n is None or data.n <= n:
        return data
    idx = np.sort(np.random.default_rng(seed).choice(data.n, int(n), replace=False))
    return Dataset(data.inputs[idx], data.targets[idx], data.tag, data.name)


def load_scenario(scenario, seed=0, options=None) -> ScenarioData:
    options = validate_options(scenario, options)
    return _load_cached(scenario, int(seed), json.dumps(options, sort_keys=True))


@functools.lru_cache(maxsize=8)
def _load_cached(scenario, seed, options_json):
    options = json.loads(options_json)
    if scenario == "toy":
        cfg = ToyConfig(**{k: _tuplify(v) for k, v in options.items()})
        splits, basis = toy_generate(cfg, seed)
        return ScenarioData(scenario, splits, basis, np.zeros(basis.n_coef), 64, 2000)

    if scenario.startswith("via"):
        synth = ViaSyntheticConfig(**options.get("synthetic", {}))
        cfg = ViaConfig(**{k: _tuplify(options[k]) for k in ("history", "split", "decimation", "init")
                           if k in options}, synthetic=synth)
        telemetry = None
        if "telemetry" in options:
            telemetry = load_via_telemetry(options["telemetry"], options.get("mapping"),
                                           options.get("telemetry_decimation", 1))
        both, basis = via_generate(cfg, seed, telemetry)
        setting = both["instantaneous" if scenario == "via_instant" else "autoregressive"]
        splits = {"train": subsample(setting["train"], options.get("max_train"), seed),
                  "test": setting["test"]}
        return ScenarioData(scenario, splits, basis, np.asarray(cfg.init, float), 64, 2000)

    cfg = SimDynConfig(mode="local" if scenario == "simdyn_ll" else "global",
                       **{k: v for k, v in options.items() if k != "max_train"})
    splits, basis, info = simdyn_generate(cfg, seed)
    splits = dict(splits, train=subsample(splits["train"], options.get("max_train"), seed))
    return ScenarioData(scenario, splits, basis, info["prior"], 128, 500,
                        {"truth": info["truth"], "names": info["base_map"].names})


def basis_for(scenario) -> BasisModel:
    if scenario == "toy":
        return toy_basis()
    if scenario.startswith("via"):
        return via_basis()
    return default_base_map().basis_model()


def save_scenario(scn: ScenarioData, out_dir, seed, options=None):
    """One CSV per split plus ``meta.json`` (scenario id, seed, prior, options)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for tag, data in scn.splits.items():
        path = out / f"{tag}.csv"
        data.to_csv(path)
        paths.append(path)
    meta = {"scenario": scn.scenario, "seed": int(seed), "prior": np.asarray(scn.prior).tolist(),
            "splits": sorted(scn.splits), "options": options or {}}
    path = out / "meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths + [path]


def load_scenario_dir(path) -> ScenarioData:
    root = Path(path)
    meta = json.loads((root / "meta.json").read_text(encoding="utf-8"))
    scenario = meta["scenario"]
    validate_options(scenario, {})
    splits = {tag: Dataset.from_csv(root / f"{tag}.csv", tag=tag, name=f"{scenario}_{tag}")
              for tag in meta["splits"]}
    width, epochs = (128, 500) if scenario.startswith("simdyn") else (64, 2000)
    return ScenarioData(scenario, splits, basis_for(scenario), np.asarray(meta["prior"], float),
                        width, epochs)
