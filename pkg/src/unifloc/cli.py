"""Command-line entry point: ``unifloc {rmse,cputime,single-run}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from .geometry import SphericalLocation
from .harness import (
    ExperimentConfig,
    Setup,
    emit_csv,
    load_config,
    run_cputime_experiment,
    run_rmse_experiment,
    sample_location,
    trial_seed,
)
from .protocol import run_protocol

log = logging.getLogger("unifloc")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unifloc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("rmse", "angle/range RMSE versus SNR, CSV output"),
                        ("cputime", "CPU time versus RIS size per dictionary variant, CSV output"),
                        ("single-run", "one protocol run, JSON-lines trace output")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key/value experiment file ([experiment] section)")
        p.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--threads", type=int, help="worker processes for trials")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: getattr(args, k) for k in ("seed", "out", "threads")
                 if getattr(args, k) is not None}
    if overrides.get("seed", 0) < 0:
        raise ValueError("seed must be non-negative")
    return replace(cfg, **overrides)


def _write(text_or_rows, cfg: ExperimentConfig) -> None:
    if isinstance(text_or_rows, str):
        if cfg.out:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text_or_rows)
        else:
            sys.stdout.write(text_or_rows)
    else:
        emit_csv(text_or_rows, cfg.out or "/dev/stdout")


def single_run(cfg: ExperimentConfig) -> str:
    setup = Setup.build(cfg)
    loc_seq, proto_seq = trial_seed(cfg.seed, 0, 0).spawn(2)
    if cfg.user_location is not None:
        p = SphericalLocation(*cfg.user_location)
    else:
        p = sample_location(setup, cfg, np.random.default_rng(loc_seq))
    trace = run_protocol(setup.geom, setup.dictionary, setup.h_A, setup.params, p,
                         cfg.protocol(cfg.snr_db[0]), proto_seq)
    return trace.to_jsonl()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "rmse":
            _write(run_rmse_experiment(cfg), cfg)
        elif args.command == "cputime":
            _write(run_cputime_experiment(cfg), cfg)
        else:
            _write(single_run(cfg), cfg)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"unifloc: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
