"""Command-line entry point.

Usage::

    sparse-mimo EXPERIMENT [--config FILE] [--seed N] [--out FILE] [--format csv|json]
    sparse-mimo check --config FILE

``EXPERIMENT`` is one of edof-sweep, rate-sweep, sumrate-far, sumrate-near,
cdf and fit-lobes.

Exit codes: 0 on success, 2 on invalid configuration or arguments,
1 on a runtime failure inside an experiment.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import (
    EXPERIMENTS,
    ConfigError,
    ScenarioConfig,
    config_from_mapping,
    load_config,
    read_mapping,
)
from .experiments import run_experiment
from .io import emit

__all__ = ["main", "build_parser"]

log = logging.getLogger("sparse_mimo")


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with code 2 on any usage error."""

    def error(self, message: str):  # pragma: no cover - argparse already uses 2
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparse-mimo", description="Sparse-array MIMO experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", help="TOML scenario file or JSON config echo; defaults apply when omitted")
        cmd.add_argument("--seed", type=int, help="override the scenario seed")
        cmd.add_argument("--out", help="output file; stdout when omitted")
        cmd.add_argument("--format", choices=("csv", "json"), help="output format (default from config)")
    check = sub.add_parser("check", help="validate a scenario file and print the resolved config")
    check.add_argument("--config", required=True)
    return parser


def _resolve(args) -> ScenarioConfig:
    if args.command == "check":
        return load_config(args.config)
    data = {} if args.config is None else read_mapping(args.config)
    named = data.setdefault("experiment", args.command)
    if named != args.command:
        raise ConfigError([f"experiment: file names {named!r}, command is {args.command!r}"])
    if args.seed is not None:
        data["seed"] = args.seed
    return config_from_mapping(data)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    if args.command == "check":
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0

    fmt = args.format or cfg["output.format"]
    out = args.out or cfg["output.path"]
    log.info("running %s (seed %d)", cfg.experiment, cfg.seed)
    try:
        table = run_experiment(cfg)
        body = emit(table, out, fmt)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out is None:
        sys.stdout.write(body)
    else:
        log.info("wrote %d rows to %s", len(table.rows), out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
