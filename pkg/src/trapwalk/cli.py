"""Command-line front end.

One subcommand per experiment; the same flags are also accepted at the
top level together with --experiment, so both spellings work:

    trapwalk survival --p 0.5 --n 8,16,32 --out survival.json
    trapwalk --experiment survival --p 0.5

Exit codes: 0 all assertions passed, 1 an assertion failed, 2 bad
configuration.  TRAPWALK_WORKERS overrides --workers.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    run_experiment,
    write_report,
)


def _add_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--dim", type=int, choices=(2, 3), help="lattice dimension")
    p.add_argument("--p", type=float, help="site vacancy probability")
    p.add_argument("--drift", help="drift vector, comma separated: x,y[,z]")
    p.add_argument("--n", help="walk length grid, comma separated")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--replicas", type=int, help="independent replicas")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per cell")
    p.add_argument("--method", help="estimator or scale choice, experiment specific")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), help="output format")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument(
        "--extra",
        action="append",
        default=None,
        metavar="KEY=JSON",
        help="extra knob, value parsed as JSON (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapwalk",
        description="Desk-scale experiments for a random walk among Bernoulli traps.",
    )
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="experiment to run")
    _add_flags(parser)
    sub = parser.add_subparsers(dest="cmd", metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        _add_flags(sp)
    return parser


def _parse_drift(text: str, d: int) -> tuple:
    try:
        parts = tuple(float(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad drift {text!r}") from exc
    if len(parts) != d:
        raise ConfigError(f"drift needs {d} components, got {len(parts)}")
    return parts


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad n grid {text!r}") from exc


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        if "config" in base and isinstance(base["config"], dict):
            base = base["config"]  # a full report file also works

    experiment = args.cmd or args.experiment or base.get("experiment")
    if not experiment:
        raise ConfigError("no experiment given; use a subcommand or --experiment")
    if args.cmd and args.experiment and args.cmd != args.experiment:
        raise ConfigError(
            f"subcommand {args.cmd!r} and --experiment {args.experiment!r} disagree"
        )
    base["experiment"] = experiment

    if args.dim is not None:
        base["d"] = args.dim
    if args.p is not None:
        base["p"] = args.p
    d = int(base.get("d", 2))
    if args.drift is not None:
        base["h"] = list(_parse_drift(args.drift, d))
    if args.n is not None:
        base["nGrid"] = list(_parse_grid(args.n))
    if args.seed is not None:
        base["seed"] = args.seed
    if args.replicas is not None:
        base["replicas"] = args.replicas
    if args.samples is not None:
        base["samples"] = args.samples
    if args.method is not None:
        base["method"] = args.method
    if args.fmt is not None:
        base["format"] = args.fmt
    if args.workers is not None:
        base["workers"] = args.workers
    if args.extra:
        extra = dict(base.get("extra", {}))
        for item in args.extra:
            if "=" not in item:
                raise ConfigError(f"--extra needs KEY=JSON, got {item!r}")
            key, _, raw = item.partition("=")
            try:
                extra[key] = json.loads(raw)
            except json.JSONDecodeError:
                extra[key] = raw  # bare strings are convenient
        base["extra"] = extra

    config = ExperimentConfig.from_dict(base)
    if args.out is not None:
        object.__setattr__(config, "out", args.out)
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        report = run_experiment(config)
    except ConfigError as exc:
        print(f"trapwalk: {exc}", file=sys.stderr)
        return 2
    text = write_report(report, config.out, config.fmt)
    if config.out:
        print(f"wrote {config.out} ({config.fmt}); passed: {str(report['passed']).lower()}")
    else:
        sys.stdout.write(text)
    for a in report["assertions"]:
        if not a["passed"]:
            print(f"FAILED {a['name']}: {a['detail']}", file=sys.stderr)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
