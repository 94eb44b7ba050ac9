"""Command line: ``aoi-bandits {run,bounds,validate}``.

Exit codes: 0 success, 2 invalid configuration, 3 unwritable output,
4 runtime invariant violation (the message names the replication seed).
Progress goes to stderr; stdout carries JSON summaries only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiment import load_config, run_experiment
from .metrics import BoundInputs, bound_table
from .model import ConfigError, InvariantViolation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OUTPUT = 3
EXIT_INVARIANT = 4


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-bandits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run replications and write CSV/JSON artifacts"),
                        ("bounds", "print the period bound table for a configuration"),
                        ("validate", "check a configuration without simulating")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", nargs="?", help="configuration file (YAML)")
        p.add_argument("--config", dest="config_opt", metavar="PATH")
        p.add_argument("--policy", action="append", metavar="NAME",
                       help="channel policy to run (repeatable; replaces the file's list)")
        p.add_argument("--seed", type=int, help="base seed")
        p.add_argument("--replications", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--lambda", dest="arrival_rate", type=float)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int)
        p.add_argument("--mode", choices=("independent", "mirrored"))
        p.add_argument("--trace", action="store_true", default=None,
                       help="dump per-slot records of the first replication")
    return parser


def _overrides(args) -> dict:
    out = {}
    for attr, key in (("seed", "base_seed"), ("replications", "replications"),
                      ("horizon", "horizon"), ("arrival_rate", "arrival_rate"),
                      ("out", "output"), ("threads", "threads"), ("mode", "mode"),
                      ("trace", "trace")):
        value = getattr(args, attr)
        if value is not None:
            out[key] = value
    if args.policy:
        out["channel_policies"] = list(args.policy)
    return out


def _progress(name, total):
    print(f"running {name} ({total} replications)", file=sys.stderr)
    done = [0]
    step = max(1, total // 10)

    def tick(seed):
        done[0] += 1
        if done[0] % step == 0 or done[0] == total:
            print(f"  {name}: {done[0]}/{total}", file=sys.stderr)

    return tick


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    path = args.config_opt or args.config
    if path is None:
        print("error: a configuration file is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(path, _overrides(args))
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(json.dumps({"valid": True, "config": cfg.to_dict()}))
        return EXIT_OK

    if args.command == "bounds":
        print(json.dumps(bound_table(BoundInputs.from_config(cfg.network)), indent=2))
        return EXIT_OK

    try:
        cfg.output.mkdir(parents=True, exist_ok=True)
        if not os.access(cfg.output, os.W_OK):
            raise PermissionError(f"{cfg.output} is not writable")
    except OSError as exc:
        print(f"error: output directory: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    try:
        summary = run_experiment(cfg, progress=_progress)
    except InvariantViolation as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: writing results: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
