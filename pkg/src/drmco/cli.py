"""Command line entry point: ``drmco {solve,evaluate,run,export-lp} --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, DrmcoError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="drmco", description="Train and evaluate multistage models with dual dynamic programming.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("solve", "train every configured model and write reports and cuts"),
        ("evaluate", "simulate trained policies on shared out-of-sample paths"),
        ("run", "solve, evaluate and write the summary table"),
        ("export-lp", "write the stage LPs of the instance as MPS files"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="experiment JSON file")
        sp.add_argument("--out", help="output directory (overrides output_dir in the config)")
        sp.add_argument("--workers", type=int, default=1, help="processes for policy evaluation")
        sp.add_argument("--verbose", "-v", action="count", default=0)
    return p


def _emit_error(kind, exc, out):
    doc = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field:
        doc["field"] = field
    for attr in ("stage", "iteration"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    text = json.dumps(doc)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass  # the message already went to stderr


def main(argv=None):
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    out = args.out
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.output_dir
        if out is None:
            raise ConfigError("output_dir: give --out or set output_dir in the config", field="output_dir")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1", field="workers")
        from . import experiment

        Path(out).mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            path = experiment.run_experiment(cfg, out, args.workers)
            print(path)
        elif args.command == "solve":
            setup = experiment.prepare(cfg)
            reports = experiment.solve_models(setup, out)
            path, _ = experiment.write_summary(setup, out, reports, {})
            print(path)
        elif args.command == "evaluate":
            setup = experiment.prepare(cfg)
            stats = experiment.evaluate_models(setup, out, args.workers)
            path, _ = experiment.write_summary(setup, out, {}, stats)
            experiment.write_plots(setup, out, stats)
            print(path)
        else:
            for path in experiment.export_lps(cfg, out):
                print(path)
    except ConfigError as exc:
        _emit_error("config", exc, out)
        return EXIT_CONFIG
    except DrmcoError as exc:
        _emit_error("solver", exc, out)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
