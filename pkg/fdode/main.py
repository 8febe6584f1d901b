import argparse
import sys
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from config import ensure_directories, settings
from fdode.commands import adm, check, compare, convergence, solve
from fdode.exceptions import (
    FdodeError,
    NumericalFailureError,
    ProblemFileError,
)
from fdode.logger import bind_command, get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROBLEM_FILE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Parser that reports usage errors instead of exiting with status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog=settings.app_name,
        description="Functional-discrete method for Cauchy problems "
        "u' - N(t, u) u = phi(t)",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {settings.app_version}",
    )
    subparsers = parser.add_subparsers(
        dest="command", required=True, parser_class=ArgumentParser
    )
    for command in (solve, adm, check, convergence, compare):
        command.register(subparsers)
    return parser


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    setup_logging()
    ensure_directories()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    bind_command(args.command, problem=str(args.problem))
    try:
        args.handler(args)
    except ProblemFileError as exc:
        logger.error("command_failed", error=str(exc))
        print(f"{parser.prog}: problem file error: {exc}", file=sys.stderr)
        return EXIT_PROBLEM_FILE
    except NumericalFailureError as exc:
        logger.error(
            "command_failed",
            module=exc.module,
            error=str(exc),
        )
        print(
            f"{parser.prog}: numerical failure in {exc.module}: {exc}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    except np.linalg.LinAlgError as exc:
        logger.error("command_failed", module="linalg", error=str(exc))
        print(
            f"{parser.prog}: numerical failure in linalg: {exc}",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    except OSError as exc:
        logger.error("command_failed", error=str(exc))
        print(f"{parser.prog}: cannot write results: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FdodeError, ValidationError) as exc:
        logger.error("command_failed", error=str(exc))
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
