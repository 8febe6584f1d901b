import argparse

from config import settings
from fdode.commands.common import (
    Run,
    add_output_arguments,
    add_problem_argument,
    finite_float,
    non_negative_int,
    positive_float,
    positive_int,
)
from fdode.logger import get_logger
from fdode.services.hypotheses import hypothesis_report
from fdode.services.problem import load_problem
from fdode.templating import render

logger = get_logger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "check", help="estimate the convergence hypotheses of a problem"
    )
    add_problem_argument(parser)
    parser.add_argument(
        "--region",
        type=finite_float,
        nargs=2,
        metavar=("LO", "HI"),
        default=list(settings.hypotheses.region),
        help="box [LO, HI]^m sampled for the dissipativity constant",
    )
    parser.add_argument(
        "--t-range",
        type=finite_float,
        nargs=2,
        metavar=("A", "B"),
        help="sampled time range (default [t0, t0 + t_span])",
    )
    parser.add_argument(
        "--samples",
        type=positive_int,
        default=settings.sampling.alpha_samples,
    )
    parser.add_argument(
        "--seed",
        type=non_negative_int,
        default=None,
        help="sampling seed (default from settings or FDODE_SEED)",
    )
    parser.add_argument(
        "--epsilon1",
        type=positive_float,
        default=settings.hypotheses.epsilon1,
    )
    add_output_arguments(parser, xlsx=False)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> None:
    spec = load_problem(args.problem)
    t_range = args.t_range or [
        spec.t0,
        spec.t0 + settings.hypotheses.t_span,
    ]
    output = Run("check", args)
    report = hypothesis_report(
        spec,
        t_range,
        region=args.region,
        epsilon1=args.epsilon1,
        samples=args.samples,
        seed=output.seed,
    )
    if not report.all_ok:
        logger.warning("hypotheses_not_satisfied", notes=report.notes)
    output.parameters.update(
        problem=str(args.problem),
        region=list(report.region),
        t_range=list(report.t_range),
        samples=report.samples,
        epsilon1=report.epsilon1,
    )
    output.results.update(
        alpha=report.alpha,
        kappa=report.kappa,
        mu=report.mu,
        h_bar=report.h_bar,
    )
    output.write_text(
        "hypotheses.txt", render("hypotheses.txt.j2", report=report)
    )
    output.finish()
