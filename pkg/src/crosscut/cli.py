"""Command-line driver: one subcommand per experiment.

Exit codes: 0 success, 2 config error, 3 acceptance-check failure,
4 transport error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    load_config,
    run_experiment,
)
from .harness import TransportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosscut",
        description="Cross-platform similarity estimation for wire-cut circuits",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="path to a JSON config document")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory for report.json and series.csv")
        p.add_argument("--distributed", action="store_true", help="run platforms as separate processes")
        p.add_argument("--mitigate", action="store_true", help="enable error mitigation")
        p.add_argument("--n", type=int, help="override the qubit count")
        p.add_argument("--shots", type=int, help="override the per-configuration shot count")
        p.add_argument("--repetitions", type=int, help="override the sub-experiment count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    doc: dict = {}
    if args.config:
        try:
            doc = json.loads(open(args.config).read())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if not isinstance(doc, dict):
            print("config error: document must be a JSON object", file=sys.stderr)
            return 2
    doc["experiment"] = args.experiment
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    if args.distributed:
        doc["distributed"] = True
    if args.mitigate:
        doc["mitigate"] = True
    if args.n is not None:
        doc["n"] = args.n
    if args.shots is not None:
        doc.setdefault("budget", {})["m"] = args.shots
    if args.repetitions is not None:
        doc["repetitions"] = args.repetitions
    try:
        cfg = load_config(doc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 4
    summary = {k: v for k, v in report["results"].items()
               if k not in ("kernel_exact", "kernel_federated", "labels")}
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    if cfg.experiment == "oracle-suite":
        for name, check in report["results"]["checks"].items():
            flag = "PASS" if check["passed"] else "FAIL"
            print(f"[{flag}] {name}: {check['value']:.3e} <= {check['tolerance']:.0e}")
        if not report["results"]["all_passed"]:
            return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
