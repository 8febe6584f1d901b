"""
Functional-discrete method: the frozen-coefficient base problem, the
recursive linear corrections and the quantities used to judge a run.
"""

from typing import Optional, Sequence

import numpy as np

from config import settings
from fdode.exceptions import IntegrationOverflowError, InvalidArgumentError
from fdode.logger import get_logger
from fdode.schemas import FdRunConfig
from fdode.services.adomian import adomian_matrix
from fdode.services.core import (
    Grid,
    PiecewiseTrajectory,
    SeriesSolution,
    inner_times,
)
from fdode.services.linode import LinearIVP, solve_linear_ivp
from fdode.services.problem import (
    ProblemSpec,
    eval_dN,
    eval_exact,
    eval_N,
    eval_phi,
)

logger = get_logger(__name__)


def _matvec(matrices: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", matrices, vectors)


def _check_grid(spec: ProblemSpec, grid: Grid) -> None:
    if grid.t0 != spec.t0:
        raise InvalidArgumentError(
            f"grid starts at {grid.t0} but the problem at {spec.t0}"
        )


def _solve_interval(grid: Grid, i: int, ivp_kwargs) -> np.ndarray:
    ivp = LinearIVP(interval=grid.interval(i), **ivp_kwargs)
    try:
        return solve_linear_ivp(ivp)
    except IntegrationOverflowError as exc:
        raise exc.at_interval(i) from None


def solve_base(
    spec: ProblemSpec, grid: Grid, inner_steps: Optional[int] = None
) -> PiecewiseTrajectory:
    """u^(0): on each interval N is frozen at the left value of u^(0)."""
    inner_steps = inner_steps or settings.solver.inner_steps
    _check_grid(spec, grid)
    times = inner_times(grid, inner_steps)
    phi = eval_phi(spec, times)
    samples = np.empty(times.shape + (spec.dim,))
    left = spec.initial_value
    for i in range(grid.n_intervals):
        samples[i] = _solve_interval(
            grid,
            i,
            dict(
                coefficient=eval_N(spec, times[i], left),
                y0=left,
                forcing=phi[i],
                inner_steps=inner_steps,
            ),
        )
        left = samples[i, -1]
    return PiecewiseTrajectory(grid, samples)


def upsilon(spec: ProblemSpec, t, freeze_at, apply_to) -> np.ndarray:
    """Matrix whose p-th column is dN/du_p(t, freeze_at) @ apply_to."""
    apply_to = np.asarray(apply_to, dtype=float)
    if apply_to.ndim == 0 or apply_to.shape[-1] != spec.dim:
        raise InvalidArgumentError(
            f"apply_to must have trailing length {spec.dim}"
        )
    columns = [
        _matvec(eval_dN(spec, t, freeze_at, p), apply_to)
        for p in range(spec.dim)
    ]
    return np.stack(columns, axis=-1)


def _check_prior(prior: Sequence[PiecewiseTrajectory], j: int) -> None:
    if j < 1:
        raise InvalidArgumentError("corrections start at j = 1")
    if len(prior) != j:
        raise InvalidArgumentError(
            f"correction {j} needs {j} prior terms, got {len(prior)}"
        )
    for term in prior[1:]:
        if not prior[0].same_layout(term):
            raise InvalidArgumentError("prior terms have different layouts")


def assemble_F(
    spec: ProblemSpec,
    prior: Sequence[PiecewiseTrajectory],
    j: int,
    i: int,
) -> np.ndarray:
    """Forcing F^(j) at the samples of interval ``i``, shape (2M+1, m)."""
    _check_prior(prior, j)
    if not 0 <= i < prior[0].grid.n_intervals:
        raise InvalidArgumentError(f"interval index {i} out of range")
    times = prior[0].times[i]
    current = np.stack([term.samples[i] for term in prior])
    left = np.stack([term.samples[i, 0] for term in prior])
    left = np.concatenate([left, np.zeros((1, spec.dim))])

    a_left = adomian_matrix(spec, times, left[:, None, :])
    a_now = adomian_matrix(spec, times, current)

    forcing = np.zeros(current.shape[1:])
    for p in range(1, j):
        forcing = forcing + _matvec(a_left[j - p], current[p])
    for p in range(j):
        k = j - 1 - p
        forcing = forcing + _matvec(a_now[k] - a_left[k], current[p])
    return forcing + _matvec(a_left[j], current[0])


def solve_correction(
    spec: ProblemSpec,
    grid: Grid,
    prior: Sequence[PiecewiseTrajectory],
    j: int,
    inner_steps: Optional[int] = None,
) -> PiecewiseTrajectory:
    """u^(j) from the linear problem with u^(0) frozen at interval starts.

    The known left value u^(j)(t_{i-1}) enters through the forcing term
    upsilon(t) @ u^(j)(t_{i-1}); it is zero on the first interval.
    """
    _check_prior(prior, j)
    inner_steps = inner_steps or settings.solver.inner_steps
    base = prior[0]
    if not base.grid.same_as(grid) or base.inner_steps != inner_steps:
        raise InvalidArgumentError("prior terms do not match grid layout")
    times = inner_times(grid, inner_steps)
    samples = np.empty(times.shape + (spec.dim,))
    left = np.zeros(spec.dim)
    for i in range(grid.n_intervals):
        frozen = base.samples[i, 0]
        gain = upsilon(spec, times[i], frozen, base.samples[i])
        forcing = _matvec(gain, left) + assemble_F(spec, prior, j, i)
        samples[i] = _solve_interval(
            grid,
            i,
            dict(
                coefficient=eval_N(spec, times[i], frozen),
                y0=left,
                forcing=forcing,
                inner_steps=inner_steps,
            ),
        )
        left = samples[i, -1]
    return PiecewiseTrajectory(grid, samples)


def fd_solve(spec: ProblemSpec, config: FdRunConfig) -> SeriesSolution:
    if config.rank > settings.solver.max_rank:
        raise InvalidArgumentError(
            f"rank {config.rank} exceeds the limit {settings.solver.max_rank}"
        )
    logger.info(
        "fd_solve_started",
        problem=spec.name,
        rank=config.rank,
        intervals=config.grid.n_intervals,
        h_max=config.grid.h_max,
        inner_steps=config.inner_steps,
    )
    terms = [solve_base(spec, config.grid, config.inner_steps)]
    for j in range(1, config.rank + 1):
        terms.append(
            solve_correction(spec, config.grid, terms, j, config.inner_steps)
        )
        logger.debug(
            "fd_term_solved",
            j=j,
            sup_norm=float(np.abs(terms[-1].samples).max()),
        )
    logger.info("fd_solve_finished", problem=spec.name, rank=config.rank)
    return SeriesSolution(tuple(terms))


def partial_sum(sol: SeriesSolution, upto: int) -> PiecewiseTrajectory:
    if not 0 <= upto <= sol.rank:
        raise InvalidArgumentError(
            f"partial sum up to {upto} outside [0, {sol.rank}]"
        )
    total = sol.terms[0].samples.copy()
    for term in sol.terms[1 : upto + 1]:
        total += term.samples
    return PiecewiseTrajectory(sol.grid, total)


def _derivative(samples: np.ndarray, spacing: np.ndarray) -> np.ndarray:
    """Fourth-order differences along axis 1, one-sided near the ends."""
    y = samples
    d = np.empty_like(y)
    d[:, 2:-2] = -y[:, 4:] + 8.0 * y[:, 3:-1] - 8.0 * y[:, 1:-3] + y[:, :-4]
    d[:, 0] = (
        -25.0 * y[:, 0]
        + 48.0 * y[:, 1]
        - 36.0 * y[:, 2]
        + 16.0 * y[:, 3]
        - 3.0 * y[:, 4]
    )
    d[:, 1] = (
        -3.0 * y[:, 0]
        - 10.0 * y[:, 1]
        + 18.0 * y[:, 2]
        - 6.0 * y[:, 3]
        + y[:, 4]
    )
    d[:, -2] = (
        3.0 * y[:, -1]
        + 10.0 * y[:, -2]
        - 18.0 * y[:, -3]
        + 6.0 * y[:, -4]
        - y[:, -5]
    )
    d[:, -1] = (
        25.0 * y[:, -1]
        - 48.0 * y[:, -2]
        + 36.0 * y[:, -3]
        - 16.0 * y[:, -4]
        + 3.0 * y[:, -5]
    )
    return d / (12.0 * spacing[:, None, None])


def residual(spec: ProblemSpec, traj: PiecewiseTrajectory) -> float:
    """Sup of ||u' - N(t, u) u - phi(t)|| over the samples."""
    if traj.samples.shape[1] < 5:
        raise InvalidArgumentError("residual needs at least 5 samples")
    if traj.dim != spec.dim:
        raise InvalidArgumentError("trajectory and problem dims differ")
    times = traj.times
    derivative = _derivative(traj.samples, traj.spacing)
    defect = (
        derivative
        - _matvec(eval_N(spec, times, traj.samples), traj.samples)
        - eval_phi(spec, times)
    )
    return float(np.linalg.norm(defect, axis=-1).max())


def pointwise_error(
    spec: ProblemSpec, traj: PiecewiseTrajectory
) -> Optional[np.ndarray]:
    """||u(t) - u*(t)|| at every sample, or None without an exact solution."""
    exact = eval_exact(spec, traj.times)
    if exact is None:
        return None
    return np.linalg.norm(traj.samples - exact, axis=-1)


def error_vs_exact(
    spec: ProblemSpec, traj: PiecewiseTrajectory
) -> Optional[float]:
    errors = pointwise_error(spec, traj)
    if errors is None:
        return None
    return float(errors.max())


def empirical_rate(errors: Sequence[float]) -> float:
    """exp of the least-squares slope of log(error) against rank."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or errors.size < 3:
        raise InvalidArgumentError("empirical rate needs at least 3 errors")
    if not np.all(np.isfinite(errors)) or np.any(errors <= 0):
        raise InvalidArgumentError("errors must be finite and positive")
    ranks = np.arange(errors.size, dtype=float)
    slope = np.polyfit(ranks, np.log(errors), 1)[0]
    return float(np.exp(slope))

