"""Command-line interface.

Subcommands (all take ``--out DIR``)::

    simulate   --config PATH          clean trajectories -> clean_*.csv, grid_*.csv
    noise      [--config PATH]        observed_*.csv from clean_*.csv in DIR
    fit        [--config PATH]        posterior.json, model.npz from observed data
    predict                           summary.csv from a fitted run directory
    experiment NAME [--config PATH]   end to end, named or from a config file
    report                            report.csv (truth versus predictions)

``--seed N`` overrides the config seed, ``--samples N`` the number of
posterior samples. Exit status is 0 on success, 2 for configuration errors
and 1 for failures in a pipeline stage.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from .config import (ConfigError, EXPERIMENT_NAMES, ExperimentConfig,
                     named_config)
from .core import PipelineError
from . import experiments as ex


def _config(args, run_dir=None):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    elif run_dir is not None and (Path(run_dir) / "config.json").exists():
        cfg = ExperimentConfig.load(Path(run_dir) / "config.json")
    else:
        raise ConfigError("--config is required (no config.json in --out)")
    return cfg.with_overrides(args.seed, args.samples)


def _save_config(out, cfg):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.dumps())


def cmd_simulate(args):
    cfg = _config(args)
    out = Path(args.out)
    data = ex.simulate(cfg)
    _save_config(out, cfg)
    ex.write_data(out, data)
    return [str(out / f"clean_{d.label}.csv") for d in data if d.clean]


def cmd_noise(args):
    out = Path(args.out)
    cfg = _config(args, out)
    data = ex.read_data(out, kinds=("clean", "grid"))
    if not any(d.clean is not None for d in data):
        raise ConfigError(f"no clean_*.csv files in {out}")
    ex.make_observations(cfg, data)
    _save_config(out, cfg)
    ex.write_data(out, [d for d in data if d.training])
    return [str(out / f"observed_{d.label}.csv") for d in data if d.training]


def cmd_fit(args):
    out = Path(args.out)
    cfg = _config(args, out)
    data = ex.read_data(out)
    if not any(d.observed is not None for d in data):
        raise ConfigError(f"no observed_*.csv files in {out}")
    t0 = time.perf_counter()
    fit, scaling = ex.fit_experiment(cfg, data)
    targets = ex._targets(cfg, data, fit)
    ex.write_fit(out, cfg, fit, scaling, targets)
    ex.write_manifest(out, cfg, {"timings_seconds": {
        "fit": time.perf_counter() - t0}})
    return [str(out / "posterior.json")]


def cmd_predict(args):
    out = Path(args.out)
    cfg, fit, scaling, targets = ex.load_fit(out)
    cfg = cfg.with_overrides(args.seed, args.samples)
    preds = ex.predict_experiment(cfg, fit, targets)
    ex.write_predictions(out, preds, cfg.retain_samples)
    physical, labels = ex.physical_predictions(cfg, fit, scaling, preds)
    written = [str(out / "summary.csv")]
    if physical:
        ex.write_predictions(out, physical, names=labels,
                             filename="summary_physical.csv")
        written.append(str(out / "summary_physical.csv"))
    return written


def cmd_experiment(args):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if args.name and args.name != cfg.name:
            raise ConfigError(f"config name {cfg.name!r} does not match "
                              f"{args.name!r}")
    elif args.name:
        cfg = named_config(args.name)
    else:
        raise ConfigError("experiment needs NAME or --config")
    cfg = cfg.with_overrides(args.seed, args.samples)
    run = ex.run_experiment(cfg)
    ex.write_run(args.out, run)
    return [str(Path(args.out) / f) for f in
            ("posterior.json", "summary.csv", "metrics.json")]


def cmd_report(args):
    return [str(p) for p in ex.write_report(args.out)]


COMMANDS = {
    "simulate": cmd_simulate,
    "noise": cmd_noise,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gpopinf",
        description="Probabilistic reduced models from noisy, sparse "
                    "trajectory data.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "experiment":
            p.add_argument("name", nargs="?",
                           help=f"one of {', '.join(EXPERIMENT_NAMES)}")
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--samples", type=int,
                       help="number of posterior samples")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        written = COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as ex_:
        print(f"gpopinf {args.command}: {ex_}", file=sys.stderr)
        return 2
    except PipelineError as ex_:
        print(f"gpopinf {args.command}: {ex_}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
