import argparse

from config import settings
from fdode.commands.common import (
    Run,
    add_grid_arguments,
    add_output_arguments,
    add_problem_argument,
    rank_range,
)
from fdode.logger import get_logger
from fdode.schemas import FdRunConfig
from fdode.services.core import make_uniform_grid, trajectory_sup_norm
from fdode.services.export import Table
from fdode.services.fdm import (
    empirical_rate,
    error_vs_exact,
    fd_solve,
    partial_sum,
)
from fdode.services.linode import reference_solve
from fdode.services.problem import load_problem

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "convergence", help="sup errors of the partial sums per rank"
    )
    add_problem_argument(parser)
    parser.add_argument(
        "--ranks", type=rank_range, required=True, metavar="A..B"
    )
    add_grid_arguments(parser)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    spec = load_problem(args.problem)
    low, high = args.ranks
    grid = make_uniform_grid(spec.t0, args.t_end, args.h)
    sol = fd_solve(
        spec, FdRunConfig(rank=high, grid=grid, inner_steps=args.inner)
    )

    reference = None
    if spec.exact is None:
        # No closed form: measure against the adaptive reference solution.
        reference = reference_solve(spec, grid, args.inner)
        logger.info("convergence_against_reference", problem=spec.name)

    errors = []
    for q in range(low, high + 1):
        traj = partial_sum(sol, q)
        if reference is None:
            errors.append(error_vs_exact(spec, traj))
        else:
            errors.append(trajectory_sup_norm(traj - reference))

    table = Table("convergence", ["rank", "sup_error", "ratio_to_previous"])
    previous = None
    for q, error in zip(range(low, high + 1), errors):
        ratio = None if previous in (None, 0.0) else error / previous
        table.rows.append([q, error, ratio])
        previous = error

    output = Run("convergence", args)
    output.parameters.update(
        problem=str(args.problem),
        ranks=f"{low}..{high}",
        h=args.h,
        t_end=args.t_end,
        inner_steps=args.inner,
        comparator="exact" if reference is None else "reference",
        reference_tol=(
            None if reference is None else settings.solver.reference_tol
        ),
    )
    if len(errors) >= 3 and all(e > 0 for e in errors):
        output.results["empirical_rate"] = empirical_rate(errors)
    output.add(table)
    output.finish()
