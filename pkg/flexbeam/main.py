"""Command-line entry point: genfun, synthesize, simulate, validate, run."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

import structlog

from flexbeam import __version__, config
from flexbeam.errors import EXIT_USAGE, FlexbeamError
from flexbeam.logging_config import setup_logging
from flexbeam.models import ExperimentPreset
from flexbeam.orchestrator import (
    cmd_genfun,
    cmd_simulate,
    cmd_synthesize,
    cmd_validate,
    load_beam,
    load_preset,
    run_pipeline,
)

logger = structlog.get_logger()

COMMANDS = ("genfun", "synthesize", "simulate", "validate", "run")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="flexbeam",
        description="Flatness-based motion planning for a beam with tip-mass.",
        epilog=(
            "exit codes: 0 success, 2 validation failure, 3 numeric failure, "
            f"4 I/O or config error, {EXIT_USAGE} usage error"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="beam config JSON (L, m, J, rho, ei)")
    parser.add_argument(
        "--preset",
        default="problem2",
        help="built-in preset (problem1, problem2, steady) or a preset JSON file",
    )
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--N", type=int, help="series truncation order")
    parser.add_argument("--s", type=float, help="Gevrey order of the bump, > 1")
    parser.add_argument("--T", type=float, help="transition time [s]")
    parser.add_argument("--nx", type=int, help="simulator grid intervals")
    parser.add_argument("--dt", type=float, help="simulator time step [s]")
    parser.add_argument(
        "--intervals",
        type=int,
        default=config.GENFUN_INTERVALS,
        help="generating-function grid intervals (genfun only)",
    )
    parser.add_argument(
        "--sign-flip",
        action="store_true",
        help="use the '+' sign in the series coefficients (diagnostic only)",
    )
    parser.add_argument(
        "--no-enforce",
        action="store_true",
        help="run: write verdicts without failing on them",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def resolve_preset(args: argparse.Namespace) -> ExperimentPreset:
    """Preset with command-line overrides applied."""
    preset = load_preset(args.preset)
    updates: dict = {}
    if args.config is not None:
        updates["beam"] = load_beam(args.config).to_spec().model_dump()
    for name in ("N", "s", "T", "nx", "dt"):
        value = getattr(args, name)
        if value is not None:
            updates[name] = value
    if args.sign_flip:
        updates["sign_flip"] = True
    if args.out is not None:
        updates["output_dir"] = args.out
    if updates:
        preset = ExperimentPreset.model_validate(
            {**preset.model_dump(), **updates}
        )
    return preset


def _run_dir(preset: ExperimentPreset) -> Path:
    return Path(preset.output_dir) / preset.name


def dispatch(args: argparse.Namespace) -> None:
    preset = resolve_preset(args)
    out = _run_dir(preset)
    if args.command == "genfun":
        cmd_genfun(preset.beam, preset.N, out, args.intervals)
    elif args.command == "synthesize":
        cmd_synthesize(preset, out)
    elif args.command == "simulate":
        cmd_simulate(preset, out)
    elif args.command == "validate":
        cmd_validate(out)
    else:
        run_pipeline(preset, preset.output_dir, enforce=not args.no_enforce)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(verbose=args.verbose)
    try:
        dispatch(args)
    except FlexbeamError as exc:
        stage = exc.stage or args.command
        logger.error("command_failed", command=args.command, error=type(exc).__name__)
        print(f"flexbeam: {stage}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
