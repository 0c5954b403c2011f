"""Command-line entry point: gen, fit, bench, plot, verify.

Exit codes: 0 success, 1 failed cells or checks, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .core import mean_nllh, rmse
from .harness import (BenchmarkConfig, ConfigError, aggregate, bench, figure_files, read_csv)
from .methods import METHOD_IDS, MethodSettings, fit_method
from .scenarios import (SCENARIO_IDS, load_scenario, load_scenario_dir, save_scenario,
                        validate_options)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="semiparam", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write scenario datasets as CSV")
    g.add_argument("scenario", choices=SCENARIO_IDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--options", help="JSON file with scenario options")

    f = sub.add_parser("fit", help="fit one method on a generated dataset directory")
    f.add_argument("method", choices=METHOD_IDS)
    f.add_argument("--data", required=True, help="directory written by `gen`")
    f.add_argument("--config", help="JSON file: {\"seed\": int, \"settings\": {...}}")
    f.add_argument("--out", required=True, help="model JSON file")

    b = sub.add_parser("bench", help="run a benchmark configuration")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="override output_dir")

    pl = sub.add_parser("plot", help="re-render figures from results.csv")
    pl.add_argument("--results", required=True)
    pl.add_argument("--out", required=True)

    sub.add_parser("verify", help="run the built-in oracle checks")
    return p


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _checked(fn, *a):
    try:
        return fn(*a)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_gen(args):
    options = _read_json(args.options) if args.options else {}
    _checked(validate_options, args.scenario, options)
    scn = load_scenario(args.scenario, args.seed, options)
    for path in save_scenario(scn, args.out, args.seed, options):
        print(path)
    return EXIT_OK


def cmd_fit(args):
    cfg = _read_json(args.config) if args.config else {}
    unknown = sorted(set(cfg) - {"seed", "settings"})
    if unknown:
        raise ConfigError(f"unknown fit config key(s): {unknown}")
    settings = _checked(MethodSettings.from_dict, cfg.get("settings", {}))
    scn = load_scenario_dir(args.data)
    fitted = fit_method(args.method, scn, int(cfg.get("seed", 0)), settings)
    doc = fitted.to_dict()
    doc["scenario"] = scn.scenario
    metrics = {}
    for split in scn.test_splits:
        if split not in scn.splits:
            continue
        data = scn.splits[split]
        pred = fitted.predict(data.inputs)
        nl = mean_nllh(pred, data.targets)
        metrics[split] = {"rmse": rmse(pred, data.targets).tolist(),
                          "nllh": None if nl is None else nl.tolist()}
        print(f"{split}: rmse={metrics[split]['rmse']} nllh={metrics[split]['nllh']}")
    doc["metrics"] = metrics
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_bench(args):
    cfg = BenchmarkConfig.from_json(args.config)
    results, written, failed = bench(cfg, args.out)
    for path in written:
        print(path)
    for c in results:
        if c.error:
            print(f"FAILED {c.method} rep {c.rep}: {c.error}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_plot(args):
    rows = read_csv(args.results)
    if not rows:
        raise ConfigError(f"{args.results} holds no result rows")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, svg in figure_files(aggregate(rows)).items():
        (out / name).write_text(svg, encoding="utf-8")
        print(out / name)
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_all
    checks = run_all()
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


COMMANDS = {"gen": cmd_gen, "fit": cmd_fit, "bench": cmd_bench, "plot": cmd_plot,
            "verify": cmd_verify}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
