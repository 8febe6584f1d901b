import argparse

import numpy as np

from config import settings
from fdode.commands.common import (
    Run,
    add_inner_argument,
    add_output_arguments,
    add_problem_argument,
    add_split_argument,
    component_headers,
    finite_float,
    linear_split,
    non_negative_int,
)
from fdode.exceptions import InvalidArgumentError
from fdode.schemas import AdmConfig
from fdode.services.adm import adm_solve, divergence_indicator
from fdode.services.export import Table
from fdode.services.problem import eval_exact, load_problem
from fdode.templating import render


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "adm", help="Adomian decomposition baseline and divergence check"
    )
    add_problem_argument(parser)
    parser.add_argument("--rank", type=non_negative_int, required=True)
    parser.add_argument("--t-end", type=finite_float, required=True)
    parser.add_argument(
        "--window",
        type=finite_float,
        nargs=2,
        metavar=("A", "B"),
        help="time window of the divergence check (default whole run)",
    )
    add_split_argument(parser)
    add_inner_argument(parser, settings.adm.inner_steps)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    if args.rank < 2:
        raise InvalidArgumentError("adm needs --rank >= 2 to judge growth")
    spec = load_problem(args.problem)
    cfg = AdmConfig(
        linear_split=linear_split(spec, args.split),
        rank=args.rank,
        t_end=args.t_end,
        inner_steps=args.inner,
    )
    sol = adm_solve(spec, cfg)
    report = divergence_indicator(sol, args.window)

    output = Run("adm", args)
    output.parameters.update(
        problem=str(args.problem),
        rank=args.rank,
        t_end=args.t_end,
        inner_steps=args.inner,
        linear_split=[x for row in cfg.linear_split for x in row],
    )
    times = sol.terms[0].times[0]
    headers = ["t"]
    for i in range(sol.rank + 1):
        headers += component_headers(f"term{i}_u", spec.dim)
    exact = eval_exact(spec, times)
    if exact is not None:
        headers += [f"delta_{i}" for i in range(sol.rank + 1)]
    table = Table("adm_terms", headers)
    values = np.stack([term.samples[0] for term in sol.terms])
    sums = np.cumsum(values, axis=0)
    for k, t in enumerate(times):
        row = [float(t)]
        for i in range(sol.rank + 1):
            row += [float(x) for x in values[i, k]]
        if exact is not None:
            row += [
                float(np.linalg.norm(sums[i, k] - exact[k]))
                for i in range(sol.rank + 1)
            ]
        table.rows.append(row)
    output.add(table)

    output.results.update(
        {f"term_norm_{i}": n for i, n in enumerate(report.term_norms)}
    )
    output.write_text(
        "adm_report.txt",
        render(
            "adm_report.txt.j2",
            problem=spec.name,
            rank=cfg.rank,
            t_end=cfg.t_end,
            linear_split=cfg.linear_split,
            report=report,
        ),
    )
    output.finish()
