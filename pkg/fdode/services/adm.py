"""
Adomian decomposition baseline: u' = L u + f1(t, u) + phi with a constant
linear split L, integrated on one global interval without a grid.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from fdode.exceptions import InvalidArgumentError
from fdode.logger import get_logger
from fdode.schemas import AdmConfig, DivergenceReport
from fdode.services.adomian import (
    FieldTerm,
    PolynomialField,
    adomian_vector_field,
)
from fdode.services.core import (
    Grid,
    PiecewiseTrajectory,
    SeriesSolution,
    inner_times,
    trajectory_sup_norm,
)
from fdode.services.expressions import TimeExpr, add, constant, is_zero
from fdode.services.linode import LinearIVP, solve_linear_ivp
from fdode.services.problem import ProblemSpec, eval_phi

logger = get_logger(__name__)


def _split_matrix(spec: ProblemSpec, linear_split) -> np.ndarray:
    split = np.asarray(linear_split, dtype=float)
    if split.shape != (spec.dim, spec.dim):
        raise InvalidArgumentError(
            f"linear split must be {spec.dim}x{spec.dim}, got {split.shape}"
        )
    if not np.all(np.isfinite(split)):
        raise InvalidArgumentError("linear split must be finite")
    return split


def nonlinear_field(spec: ProblemSpec, linear_split) -> PolynomialField:
    """f1(t, u) = N(t, u) u - L u with equal monomials merged."""
    split = _split_matrix(spec, linear_split)
    m = spec.dim
    merged: Dict[Tuple[int, ...], List[TimeExpr]] = {}

    def accumulate(powers, column: int, values) -> None:
        shifted = list(powers)
        shifted[column] += 1
        vector = merged.setdefault(tuple(shifted), [constant(0.0)] * m)
        for row in range(m):
            vector[row] = add(vector[row], values[row])

    for term in spec.terms:
        for column in range(m):
            accumulate(
                term.powers,
                column,
                [term.coeff[row][column] for row in range(m)],
            )
    for column in range(m):
        accumulate(
            (0,) * m,
            column,
            [constant(-split[row, column]) for row in range(m)],
        )
    terms = tuple(
        FieldTerm(powers=powers, coeff=tuple(vector))
        for powers, vector in merged.items()
        if not all(is_zero(e) for e in vector)
    )
    return PolynomialField(dim=m, terms=terms)


def adm_solve(spec: ProblemSpec, cfg: AdmConfig) -> SeriesSolution:
    """Terms u_A^(0..p) on the single interval [t0, t_end]."""
    split = _split_matrix(spec, cfg.linear_split)
    grid = Grid(t0=spec.t0, nodes=np.array([cfg.t_end]))
    times = inner_times(grid, cfg.inner_steps)[0]
    field = nonlinear_field(spec, split)
    logger.info(
        "adm_solve_started",
        problem=spec.name,
        rank=cfg.rank,
        t_end=cfg.t_end,
        field_terms=len(field.terms),
    )

    def solve(y0, forcing) -> np.ndarray:
        return solve_linear_ivp(
            LinearIVP(
                interval=grid.interval(0),
                coefficient=split,
                y0=y0,
                forcing=forcing,
                inner_steps=cfg.inner_steps,
            )
        )

    terms = [solve(spec.initial_value, eval_phi(spec, times))]
    for i in range(1, cfg.rank + 1):
        arguments = np.stack(terms)
        forcing = adomian_vector_field(field, times, arguments)[i - 1]
        terms.append(solve(np.zeros(spec.dim), forcing))
    logger.info("adm_solve_finished", problem=spec.name, rank=cfg.rank)
    return SeriesSolution(
        tuple(PiecewiseTrajectory(grid, term[None]) for term in terms)
    )


def divergence_indicator(
    sol: SeriesSolution,
    window: Optional[Sequence[float]] = None,
    diverging_factor: Optional[float] = None,
    converging_factor: Optional[float] = None,
) -> DivergenceReport:
    """Classify the growth of the last three term norms over ``window``."""
    if sol.rank < 2:
        raise InvalidArgumentError("divergence check needs rank >= 2")
    diverging_factor = diverging_factor or settings.adm.diverging_factor
    converging_factor = converging_factor or settings.adm.converging_factor
    if window is None:
        window = (sol.grid.t0, sol.grid.t_end)
    norms = tuple(
        trajectory_sup_norm(term, "value", window) for term in sol.terms
    )
    previous, middle, last = norms[-3:]
    if middle == 0.0 and last == 0.0:
        verdict = "converging"
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.divide([middle, last], [previous, middle])
        if np.all(ratios >= diverging_factor):
            verdict = "diverging"
        elif np.all(ratios <= converging_factor):
            verdict = "converging"
        else:
            verdict = "inconclusive"
    logger.info("divergence_checked", verdict=verdict, term_norms=norms)
    return DivergenceReport(
        verdict=verdict,
        term_norms=norms,
        window=(float(window[0]), float(window[1])),
    )
