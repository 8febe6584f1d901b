"""Argument types and output plumbing shared by the subcommands."""

import argparse
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import get_seed, settings
from fdode.exceptions import InvalidArgumentError
from fdode.logger import get_logger
from fdode.schemas import RunManifest
from fdode.services.export import (
    MANIFEST_NAME,
    Table,
    write_csv,
    write_manifest,
    write_workbook,
)
from fdode.services.problem import ProblemSpec

logger = get_logger(__name__)


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"not an integer: {text!r}"
        ) from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def positive_int(text: str) -> int:
    value = non_negative_int(text)
    if value == 0:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def rank_range(text: str) -> Tuple[int, int]:
    """``A..B`` with 0 <= A <= B."""
    first, sep, last = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(
            f"expected a rank range A..B, got {text!r}"
        )
    low, high = non_negative_int(first), non_negative_int(last)
    if low > high:
        raise argparse.ArgumentTypeError(f"empty rank range {text!r}")
    return low, high


def add_problem_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--problem",
        required=True,
        help="problem file path or bundled name "
        "(paper_example, linear_decay, cubic_1d)",
    )


def add_grid_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--h", type=positive_float, required=True)
    parser.add_argument("--t-end", type=finite_float, required=True)
    add_inner_argument(parser, settings.solver.inner_steps)


def add_inner_argument(parser: argparse.ArgumentParser, default: int) -> None:
    parser.add_argument(
        "--inner",
        type=positive_int,
        default=default,
        help=f"inner RK4 steps per interval (default {default})",
    )


def add_output_arguments(
    parser: argparse.ArgumentParser, xlsx: bool = True
) -> None:
    parser.add_argument(
        "--out",
        type=Path,
        default=Path(settings.output.dir),
        help="output directory",
    )
    if xlsx:
        parser.add_argument(
            "--xlsx",
            action="store_true",
            help="also write every table into one Excel workbook",
        )


def add_split_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--split",
        type=finite_float,
        nargs="+",
        metavar="L",
        help="linear split as m*m row-major entries (default -identity)",
    )


def linear_split(
    spec: ProblemSpec, entries: Optional[Sequence[float]]
) -> Tuple[Tuple[float, ...], ...]:
    if entries is None:
        matrix = np.diag(np.full(spec.dim, -1.0))
    else:
        if len(entries) != spec.dim * spec.dim:
            raise InvalidArgumentError(
                f"--split needs {spec.dim * spec.dim} entries, "
                f"got {len(entries)}"
            )
        matrix = np.reshape(entries, (spec.dim, spec.dim))
    return tuple(tuple(float(x) for x in row) for row in matrix)


def component_headers(prefix: str, dim: int) -> List[str]:
    return [f"{prefix}{k + 1}" for k in range(dim)]


class Run:
    """Collects tables for one command and writes them with a manifest."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.out: Path = args.out
        self.xlsx: bool = getattr(args, "xlsx", False)
        self.parameters: Dict[str, object] = {}
        self.results: Dict[str, Optional[float]] = {}
        self.tables: List[Table] = []
        self.files: List[str] = []
        self._started = time.perf_counter()
        seed = getattr(args, "seed", None)
        self.seed = get_seed() if seed is None else seed

    def add(self, table: Table) -> None:
        self.tables.append(table)

    def write_text(self, filename: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / filename
        path.write_text(text, encoding="utf-8")
        self.files.append(filename)
        return path

    def finish(self) -> List[str]:
        for table in self.tables:
            write_csv(self.out, table)
            self.files.append(table.filename)
        if self.xlsx and self.tables:
            workbook = f"{self.command}.xlsx"
            write_workbook(self.out / workbook, self.tables)
            self.files.append(workbook)
        self.files.append(MANIFEST_NAME)
        manifest = RunManifest(
            command=self.command,
            parameters={**self.parameters, "seed": self.seed},
            tool_version=settings.app_version,
            duration_s=time.perf_counter() - self._started,
            files=list(self.files),
            results=self.results,
        )
        write_manifest(self.out, manifest)
        logger.info(
            "command_finished",
            out=str(self.out),
            files=self.files,
            duration_s=round(manifest.duration_s, 3),
        )
        for name in self.files:
            print(self.out / name)
        return self.files
