import argparse

from fdode.commands.common import (
    Run,
    add_grid_arguments,
    add_output_arguments,
    add_problem_argument,
    component_headers,
    non_negative_int,
)
from fdode.logger import get_logger
from fdode.schemas import FdRunConfig
from fdode.services.core import make_uniform_grid, unique_sample_mask
from fdode.services.export import Table
from fdode.services.fdm import (
    error_vs_exact,
    fd_solve,
    partial_sum,
    pointwise_error,
    residual,
)
from fdode.services.problem import load_problem

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "solve", help="FD-method partial sums on a uniform grid"
    )
    add_problem_argument(parser)
    parser.add_argument("--rank", type=non_negative_int, required=True)
    add_grid_arguments(parser)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    logger.info("solve_command_started", rank=args.rank, h=args.h)
    spec = load_problem(args.problem)
    grid = make_uniform_grid(spec.t0, args.t_end, args.h)
    config = FdRunConfig(rank=args.rank, grid=grid, inner_steps=args.inner)
    sol = fd_solve(spec, config)
    sums = [partial_sum(sol, q) for q in range(sol.rank + 1)]

    output = Run("solve", args)
    output.parameters.update(
        problem=str(args.problem),
        rank=args.rank,
        h=args.h,
        t_end=args.t_end,
        inner_steps=args.inner,
    )

    times, _ = sums[0].flatten()
    headers = ["t"]
    columns = []
    for q, traj in enumerate(sums):
        headers += component_headers(f"p{q}_u", spec.dim)
        columns.append(traj.flatten()[1])
    solution = Table("solution", headers)
    for k, t in enumerate(times):
        row = [float(t)]
        for values in columns:
            row += [float(x) for x in values[k]]
        solution.rows.append(row)
    output.add(solution)

    if spec.exact is not None:
        errors = Table(
            "errors", ["t"] + [f"delta_{q}" for q in range(len(sums))]
        )
        keep = unique_sample_mask(sums[0].times.shape)
        profiles = [pointwise_error(spec, traj)[keep] for traj in sums]
        for k, t in enumerate(times):
            errors.rows.append([float(t)] + [float(p[k]) for p in profiles])
        output.add(errors)

    summary = Table("summary", ["rank", "sup_error", "residual"])
    for q, traj in enumerate(sums):
        sup_error = error_vs_exact(spec, traj)
        summary.rows.append([q, sup_error, residual(spec, traj)])
        output.results[f"sup_error_{q}"] = sup_error
    output.add(summary)
    output.finish()
