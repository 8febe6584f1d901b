import argparse

import numpy as np

from config import settings
from fdode.commands.common import (
    Run,
    add_grid_arguments,
    add_output_arguments,
    add_problem_argument,
    add_split_argument,
    component_headers,
    linear_split,
    non_negative_int,
    positive_float,
    positive_int,
)
from fdode.schemas import AdmConfig, FdRunConfig
from fdode.services.adm import adm_solve
from fdode.services.core import make_uniform_grid, trajectory_eval_many
from fdode.services.export import Table
from fdode.services.fdm import fd_solve, partial_sum
from fdode.services.linode import reference_solve
from fdode.services.problem import eval_exact, load_problem


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "compare", help="FD method, ADM and reference on report times"
    )
    add_problem_argument(parser)
    parser.add_argument("--rank", type=non_negative_int, required=True)
    add_grid_arguments(parser)
    parser.add_argument(
        "--tol",
        type=positive_float,
        default=settings.solver.reference_tol,
        help="reference integrator tolerance",
    )
    parser.add_argument(
        "--points",
        type=positive_int,
        default=settings.output.report_points,
        help="number of uniform report times",
    )
    parser.add_argument(
        "--adm-inner",
        type=positive_int,
        default=settings.adm.inner_steps,
        help="inner steps of the single ADM interval",
    )
    add_split_argument(parser)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    spec = load_problem(args.problem)
    grid = make_uniform_grid(spec.t0, args.t_end, args.h)
    fd = partial_sum(
        fd_solve(
            spec,
            FdRunConfig(rank=args.rank, grid=grid, inner_steps=args.inner),
        ),
        args.rank,
    )
    adm_terms = adm_solve(
        spec,
        AdmConfig(
            linear_split=linear_split(spec, args.split),
            rank=args.rank,
            t_end=grid.t_end,
            inner_steps=args.adm_inner,
        ),
    )
    adm = adm_terms.terms[0]
    for term in adm_terms.terms[1:]:
        adm = adm + term
    reference = reference_solve(spec, grid, args.inner, args.tol)

    times = np.linspace(grid.t0, grid.t_end, max(args.points, 2))
    times[-1] = grid.t_end
    fd_values = trajectory_eval_many(fd, times)
    adm_values = trajectory_eval_many(adm, times)
    reference_values = trajectory_eval_many(reference, times)
    exact = eval_exact(spec, times)
    target = reference_values if exact is None else exact

    headers = ["t"]
    headers += component_headers("fd_u", spec.dim)
    headers += component_headers("adm_u", spec.dim)
    headers += component_headers("ref_u", spec.dim)
    if exact is not None:
        headers += component_headers("exact_u", spec.dim)
    headers += ["fd_error", "adm_error", "ref_error"]
    table = Table("compare", headers)
    for k, t in enumerate(times):
        row = [float(t)]
        blocks = [fd_values[k], adm_values[k], reference_values[k]]
        if exact is not None:
            blocks.append(exact[k])
        for block in blocks:
            row += [float(x) for x in block]
        row += [
            float(np.linalg.norm(values[k] - target[k]))
            for values in (fd_values, adm_values, reference_values)
        ]
        table.rows.append(row)

    output = Run("compare", args)
    output.parameters.update(
        problem=str(args.problem),
        rank=args.rank,
        h=args.h,
        t_end=args.t_end,
        inner_steps=args.inner,
        adm_inner_steps=args.adm_inner,
        tol=args.tol,
        points=args.points,
        comparator="exact" if exact is not None else "reference",
    )
    output.add(table)
    output.finish()
