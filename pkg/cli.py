"""
bowditch-lab — entry point.

Startup order:
  1. Parse the command line (built-in `version`, experiment commands)
  2. Configure logging (stderr, bracketed module prefix)
  3. Read and parse the experiment document (failures still write a report)
  4. Apply command-line overrides (seed, depth, radius, ...)
  5. Run the experiment and write the JSON report (stdout or --out)
  6. Write the DOT sidecar if requested; exit with the report's status
"""

import argparse
import logging
import sys
from pathlib import Path

from config import DEFAULT_SEED, PROGRAM_NAME, VERSION
from modules import experiments
from modules.errors import EXIT_OK, BoundaryError, ValidationError
from modules.specfile import parse_spec

log = logging.getLogger(PROGRAM_NAME)

OVERRIDES = ("depth", "deeper", "radius", "R", "imax", "ball_cap", "graph")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROGRAM_NAME,
        description="Finite-scale certificates for boundaries of free groups relative to malnormal subgroups.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("version", help="print the version")
    experiments.register(subparsers)
    return parser


def configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _write_report(report: experiments.Report, out: str | None) -> None:
    if report.error:
        print(f"Error: {report.error['message']}", file=sys.stderr)
    text = report.to_json()
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
        log.info("report written to %s", out)
    else:
        print(text)


def main(argv: list[str] | None = None) -> int:
    # ── 1. Command line ───────────────────────────────────────────────────────
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(f"{PROGRAM_NAME} {VERSION}")
        return EXIT_OK

    # ── 2. Logging ────────────────────────────────────────────────────────────
    configure_logging(args.verbose)

    # ── 3. Document ───────────────────────────────────────────────────────────
    try:
        text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        error = ValidationError(f"cannot read {args.spec}: {exc}", field="spec")
        _write_report(experiments.failure_report(args.command, error, DEFAULT_SEED if args.seed is None else args.seed), args.out)
        return error.exit_status
    try:
        config = parse_spec(text)
    except BoundaryError as exc:
        _write_report(experiments.failure_report(args.command, exc, DEFAULT_SEED if args.seed is None else args.seed), args.out)
        return exc.exit_status

    # ── 4. Overrides ──────────────────────────────────────────────────────────
    if args.seed is not None:
        config.seed = args.seed
    overrides = {key: getattr(args, key, None) for key in OVERRIDES}

    # ── 5. Run ────────────────────────────────────────────────────────────────
    report = experiments.run_experiment(config, args.command, overrides)
    _write_report(report, args.out)

    # ── 6. Sidecars ───────────────────────────────────────────────────────────
    if args.dot:
        if report.dot:
            Path(args.dot).write_text(report.dot, encoding="utf-8")
            log.info("DOT written to %s", args.dot)
        else:
            log.warning("%s has no DOT output", args.command)
    return report.exit_status


if __name__ == "__main__":
    sys.exit(main())
