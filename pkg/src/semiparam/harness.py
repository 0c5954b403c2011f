"""Benchmark orchestration: run methods over seeds, aggregate, write tables and figures."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import mean_nllh, pooled_rmse, rmse
from .methods import METHOD_IDS, MethodSettings, fit_method
from .plotting import bar_chart_svg
from .scenarios import SCENARIO_IDS, TEST_SPLITS, load_scenario, validate_options

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scenario", "method", "seed", "split", "dim", "rmse", "nllh", "wall_ms")
CONFIG_KEYS = {"scenario", "methods", "repetitions", "base_seed", "output_dir", "scenario_options",
               "settings", "record_wall_time", "plots"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkConfig:
    scenario: str
    methods: tuple
    repetitions: int = 5
    base_seed: int = 0
    output_dir: str = "results"
    scenario_options: dict = field(default_factory=dict)
    settings: MethodSettings = MethodSettings()
    record_wall_time: bool = False
    plots: bool = True

    @classmethod
    def from_dict(cls, d):
        unknown = sorted(set(d) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {unknown}")
        for key in ("scenario", "methods"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        methods = tuple(d["methods"])
        bad = [m for m in methods if m not in METHOD_IDS]
        if bad:
            raise ConfigError(f"unknown method id(s): {bad}")
        if not methods:
            raise ConfigError("method list is empty")
        if len(set(methods)) != len(methods):
            raise ConfigError("duplicate method ids")
        reps = int(d.get("repetitions", 5))
        if reps < 1:
            raise ConfigError("repetitions must be >= 1")
        try:
            options = validate_options(d["scenario"], d.get("scenario_options", {}))
            settings = MethodSettings.from_dict(d.get("settings", {}))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(d["scenario"], methods, reps, int(d.get("base_seed", 0)),
                   str(d.get("output_dir", "results")), options, settings,
                   bool(d.get("record_wall_time", False)), bool(d.get("plots", True)))

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def derive_seed(base_seed, label, rep) -> int:
    """Stable 64-bit seed from (base seed, label, repetition)."""
    h = hashlib.blake2b(f"{base_seed}|{label}|{rep}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def scenario_seed(cfg: BenchmarkConfig, rep) -> int:
    # shared by all methods within a repetition
    return derive_seed(cfg.base_seed, "scenario", rep) % (2 ** 32)


@dataclass
class CellResult:
    scenario: str
    method: str
    rep: int
    seed: int
    metrics: list = field(default_factory=list)      # (split, dim, rmse, nllh)
    pooled: dict = field(default_factory=dict)       # split -> pooled rmse
    coefficients: Optional[list] = None
    wall_ms: float = 0.0
    error: Optional[str] = None


def run_cell(cfg: BenchmarkConfig, method: str, rep: int) -> CellResult:
    seed = derive_seed(cfg.base_seed, method, rep)
    cell = CellResult(cfg.scenario, method, rep, seed)
    try:
        scn = load_scenario(cfg.scenario, scenario_seed(cfg, rep), cfg.scenario_options)
        t0 = time.perf_counter()
        fitted = fit_method(method, scn, seed % (2 ** 32), cfg.settings)
        cell.wall_ms = 1000.0 * (time.perf_counter() - t0)
        for split in scn.test_splits:
            data = scn.splits[split]
            pred = fitted.predict(data.inputs)
            r = rmse(pred, data.targets)
            nl = mean_nllh(pred, data.targets)
            for d in range(len(r)):
                cell.metrics.append((split, d, float(r[d]), None if nl is None else float(nl[d])))
            cell.pooled[split] = pooled_rmse(pred, data.targets)
        if fitted.coefficients is not None:
            cell.coefficients = np.asarray(fitted.coefficients, float).tolist()
    except Exception as exc:  # per-cell failures are recorded, the run continues
        log.error("cell %s/%s rep %d failed: %s", cfg.scenario, method, rep, exc)
        cell.metrics = []
        cell.error = f"{type(exc).__name__}: {exc}"
        log.debug(traceback.format_exc())
    return cell


def _thread_count():
    env = os.environ.get("SEMIPARAM_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ConfigError("SEMIPARAM_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_benchmark(cfg: BenchmarkConfig, workers=None):
    """All (method, repetition) cells, sorted by (method order, rep)."""
    jobs = [(m, r) for r in range(cfg.repetitions) for m in cfg.methods]
    workers = min(workers or _thread_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, [cfg] * len(jobs), *zip(*jobs)))
    else:
        results = [run_cell(cfg, m, r) for m, r in jobs]
    order = {m: i for i, m in enumerate(cfg.methods)}
    return sorted(results, key=lambda c: (order[c.method], c.rep))


def _stats(values):
    if not values:
        return None
    a = np.asarray(values, float)
    return {"mean": float(a.mean()), "std": float(a.std()), "min": float(a.min()),
            "max": float(a.max()), "n": int(a.size)}


def aggregate(rows):
    """Group long-format rows by (scenario, method, split, dim); population std over reps.

    ``rows`` holds dicts with the CSV columns (rmse/nllh may be ``None``).
    Failed cells are passed as rows with ``failed=True`` and only counted.
    """
    groups = {}
    for row in rows:
        key = (row["scenario"], row["method"], row["split"], int(row["dim"]))
        g = groups.setdefault(key, {"rmse": [], "nllh": [], "failed": 0})
        if row.get("failed"):
            g["failed"] += 1
            continue
        g["rmse"].append(row["rmse"])
        if row["nllh"] is not None:
            g["nllh"].append(row["nllh"])
    table = []
    for (scenario, method, split, dim), g in groups.items():
        table.append({"scenario": scenario, "method": method, "split": split, "dim": dim,
                      "rmse": _stats(g["rmse"]), "nllh": _stats(g["nllh"]), "failed": g["failed"]})
    return table


def result_rows(results):
    """Long-format rows (one per split and dim) plus failure markers."""
    rows = []
    for c in results:
        for split, dim, r, nl in c.metrics:
            rows.append({"scenario": c.scenario, "method": c.method, "seed": c.seed, "split": split,
                         "dim": dim, "rmse": r, "nllh": nl, "wall_ms": c.wall_ms})
    return rows


def _failure_rows(results):
    out = []
    for c in results:
        if c.error is None:
            continue
        for split in TEST_SPLITS[c.scenario]:
            out.append({"scenario": c.scenario, "method": c.method, "split": split, "dim": 0,
                        "failed": True})
    return out


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_csv(rows, path, record_wall_time=False):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r["scenario"], r["method"], r["seed"], r["split"], r["dim"], _fmt(r["rmse"]),
                        _fmt(r["nllh"]), f"{r['wall_ms']:.1f}" if record_wall_time else ""])


def read_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}")
        for r in reader:
            rows.append({"scenario": r["scenario"], "method": r["method"], "seed": int(r["seed"]),
                         "split": r["split"], "dim": int(r["dim"]), "rmse": float(r["rmse"]),
                         "nllh": float(r["nllh"]) if r["nllh"] else None,
                         "wall_ms": float(r["wall_ms"]) if r["wall_ms"] else 0.0})
    return rows


def figure_files(table, methods=None):
    """SVG documents keyed by file name, one per (scenario, metric, split, dim)."""
    cells = {}
    for row in table:
        cells.setdefault((row["scenario"], row["split"], row["dim"]), {})[row["method"]] = row
    methods_seen = []
    for row in table:
        if row["method"] not in methods_seen:
            methods_seen.append(row["method"])
    methods = list(methods or methods_seen)
    out = {}
    for (scenario, split, dim), by_method in sorted(cells.items()):
        labels = [m for m in methods if m in by_method]
        for metric in ("rmse", "nllh"):
            stats = [by_method[m][metric] for m in labels]
            if all(s is None for s in stats):
                continue
            means = [None if s is None else s["mean"] for s in stats]
            stds = [None if s is None else s["std"] for s in stats]
            title = f"{scenario} {split} dim {dim}: {metric.upper()} (mean and std over runs)"
            out[f"{scenario}_{metric}_{split}_dim{dim}.svg"] = bar_chart_svg(
                title, labels, means, stds, metric.upper())
    return out


def emit_outputs(cfg: BenchmarkConfig, results, out_dir=None):
    """Write results.csv, results.json, timings.json and SVG figures; return written paths."""
    rows = result_rows(results)
    if not cfg.methods or not results:
        raise ValueError("nothing to emit: empty method subset")
    table = aggregate(rows + _failure_rows(results))
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    written = []
    path = out / "results.csv"
    write_csv(rows, path, cfg.record_wall_time)
    written.append(path)
    doc = {
        "scenario": cfg.scenario, "methods": list(cfg.methods), "repetitions": cfg.repetitions,
        "base_seed": cfg.base_seed, "table": table,
        "cells": [{"method": c.method, "rep": c.rep, "seed": c.seed, "pooled_rmse": c.pooled,
                   "coefficients": c.coefficients, "error": c.error} for c in results],
        "failures": [{"method": c.method, "rep": c.rep, "error": c.error}
                     for c in results if c.error is not None],
    }
    path = out / "results.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    path = out / "timings.json"
    path.write_text(json.dumps([{"method": c.method, "rep": c.rep, "wall_ms": round(c.wall_ms, 1)}
                                for c in results], indent=2) + "\n", encoding="utf-8")
    written.append(path)
    if cfg.plots:
        for name, svg in figure_files([r for r in table if r["rmse"] is not None or r["nllh"]],
                                      cfg.methods).items():
            path = out / name
            path.write_text(svg, encoding="utf-8")
            written.append(path)
    return written


def bench(cfg: BenchmarkConfig, out_dir=None):
    """Run, write outputs and return (results, written paths, any_failed)."""
    results = run_benchmark(cfg)
    written = emit_outputs(cfg, results, out_dir)
    return results, written, any(c.error is not None for c in results)
