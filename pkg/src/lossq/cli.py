"""``lossq`` command-line entry point.

Exit codes: 0 ok, 1 usage, 2 validation, 3 regime or numerical failure,
4 comparison failed, 5 runaway simulation.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .config import COMMANDS, FORMATS, dumps, load_config
from .errors import (
    DegenerateComparisonError,
    LossqError,
    RunawaySimulationError,
    ValidationError,
)
from .report import emit, execute, summary_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_REGIME = 3
EXIT_COMPARISON = 4
EXIT_RUNAWAY = 5

log = logging.getLogger("lossq")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is our validation code
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lossq", description="Finite-buffer loss system toolkit.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
    ap.add_argument("--seed", type=int, help="override command.seed")
    ap.add_argument("--out", metavar="PATH", help="override output.path")
    ap.add_argument("--format", choices=FORMATS, help="override output.format")
    ap.add_argument("--echo-config", action="store_true", help="print the normalized config and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _apply_overrides(cfg, args):
    cmd, out = cfg.command, cfg.output
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError("must be a 64-bit unsigned integer", field="command.seed")
        cmd = replace(cmd, seed=args.seed)
    if args.out is not None:
        out = replace(out, path=args.out)
    if args.format is not None:
        out = replace(out, format=args.format)
    return replace(cfg, command=cmd, output=out)


def _write(path: str, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {path!r}: {exc.strerror}", field="output.path") from None


def _summary_path(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".summary.json"


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.command)
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc.strerror}") from None
    cfg = _apply_overrides(cfg, args)

    if args.echo_config:
        sys.stdout.write(dumps(cfg))
        return EXIT_OK

    log.info("running %s", cfg.command.name)
    result = execute(cfg)
    fmt, path = cfg.output.format, cfg.output.path
    text = emit(result, fmt)
    if path:
        _write(path, text)
        if fmt == "csv" and result.command == "simulate":
            _write(_summary_path(path), summary_json(result))
    else:
        sys.stdout.write(text)
        if fmt == "csv" and result.command == "simulate":
            sys.stderr.write(summary_json(result))
    if not result.passed:
        log.warning("comparison failed at |z| > %g", result.summary.get("threshold", 3.0))
        return EXIT_COMPARISON
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run_cli(argv)
    except UsageError as exc:
        print(f"lossq: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"lossq: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DegenerateComparisonError as exc:
        print(f"lossq: comparison failed: {exc}", file=sys.stderr)
        return EXIT_COMPARISON
    except RunawaySimulationError as exc:
        print(f"lossq: runaway simulation: {exc}", file=sys.stderr)
        return EXIT_RUNAWAY
    except LossqError as exc:
        print(f"lossq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
