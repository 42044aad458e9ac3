# src/cli/main.py - python -m src.cli.main <command> [problem.json]
import argparse
import sys
from typing import List, Optional

from src.shared.logging import setup_logging
from src.shared.models import Command
from .report import OutputFormat, emit_report
from .runner import CommandRunner


def _positive_float(value: str) -> float:
    number = float(value)
    if not number > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarmod",
        description="Polar decompositions and generalized inverses of operators on Hilbert C*-modules.",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Analysis to run")
    parser.add_argument("problem", nargs="?", default=None, help="Problem file (JSON); not needed for selftest")
    parser.add_argument("--tol", type=_positive_float, default=None,
                        help="Identity residual tolerance (default 1e-8, env POLAR_TOL)")
    parser.add_argument("--rank-tol", type=_positive_float, default=None,
                        help="Relative rank tolerance (default 1e-10)")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.TEXT.value,
                        help="Report format (default text)")
    parser.add_argument("--seed", type=int, default=None, help="Selftest seed (default 0)")
    parser.add_argument("--components", type=int, default=None, help="Graded truncation length")
    parser.add_argument("--corpus-size", type=int, default=None, help="Selftest corpus size (default 200)")
    parser.add_argument("--timing", action="store_true", help="Include elapsed time in the report")
    parser.add_argument("--log-level", default=None, help="Override POLAR_LOG_LEVEL")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    setup_logging(args.log_level)
    for name, value in (("--seed", args.seed), ("--components", args.components),
                        ("--corpus-size", args.corpus_size)):
        if value is not None and value < (0 if name == "--seed" else 1):
            parser.print_usage(sys.stderr)
            sys.stderr.write(f"polarmod: error: {name} must be {'non-negative' if name == '--seed' else 'positive'}\n")
            return 2

    runner = CommandRunner(
        overrides={"identity_tol": args.tol, "rank_tol": args.rank_tol},
        components=args.components,
        seed=args.seed,
        corpus_size=args.corpus_size,
        timing=args.timing,
    )
    report = runner.run_command(Command(args.command), args.problem)
    sys.stdout.write(emit_report(report, OutputFormat(args.format)))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
