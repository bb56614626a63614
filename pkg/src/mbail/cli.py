"""Command-line entry point: ``python -m mbail <subcommand> [--config f] [--out d] [--seeds 0,1] [--threads n]``."""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXIT_ACCEPTANCE,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_VALIDATION,
    KINDS,
    ExperimentConfig,
    cmd_gridworld_sweep,
    cmd_hard_instance_verify,
    cmd_mbail_run,
    cmd_unit_oracles,
)
from .mdp import ValidationError


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbail", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seeds", help="comma-separated seeds")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="override a parameter, e.g. --set K=200")
    return parser


def build_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, kind=args.kind)
    else:
        cfg = ExperimentConfig(args.kind)
    if args.out:
        cfg.out_dir = args.out
    if args.seeds:
        cfg.seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        if not cfg.seeds:
            raise ValidationError("seed list must be non-empty")
    if args.threads:
        cfg.threads = args.threads
    for item in args.set:
        key, _, value = item.partition("=")
        try:
            cfg.params[key] = json.loads(value)
        except json.JSONDecodeError:
            cfg.params[key] = value
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if cfg.kind in ("gridworld-reward-sweep", "gridworld-stochasticity-sweep"):
            _, path = cmd_gridworld_sweep(cfg)
            print(f"wrote {path}")
        elif cfg.kind == "mbail-run":
            for seed, _, summary in cmd_mbail_run(cfg):
                print(json.dumps(summary, sort_keys=True))
        elif cfg.kind == "hard-instance-verify":
            rows, pack = cmd_hard_instance_verify(cfg)
            held = sum(1 for r in rows[1:] if r[-1])
            valid = all(r[-1] for r in pack)
            print(f"gap bound held in {held}/{len(rows) - 1} draws; packing valid: {valid}")
            if held < len(rows) - 1 or not valid:
                return EXIT_ACCEPTANCE
        else:
            return cmd_unit_oracles(cfg)
    except (ValidationError, ValueError, KeyError, TypeError) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
