"""
Linear initial value problems on one interval.

The solver is classical fourth-order Runge-Kutta with M steps of size
H = (b - a) / M over the 2M+1 sample layout: a step runs from sample 2k to
sample 2k+2 and evaluates the coefficient and forcing only at samples 2k,
2k+1 and 2k+2. The sample at 2k+1 is filled from the cubic Hermite
continuous extension of the step.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from config import settings
from fdode.exceptions import (
    InvalidArgumentError,
    IntegrationOverflowError,
    NumericalFailureError,
    StiffnessError,
)
from fdode.logger import get_logger
from fdode.services.core import (
    Grid,
    PiecewiseTrajectory,
    inner_times,
    spectral_norm,
)
from fdode.services.problem import ProblemSpec, eval_N, eval_phi

logger = get_logger(__name__)

SampledField = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def sample_times(interval: Tuple[float, float], inner_steps: int):
    a, b = float(interval[0]), float(interval[1])
    times = np.linspace(a, b, 2 * inner_steps + 1)
    times[0], times[-1] = a, b
    return times


@dataclass(frozen=True, eq=False)
class LinearIVP:
    """y' = A(t) y + g(t) on [a, b], y(a) = y0.

    ``coefficient`` and ``forcing`` are vectorised callables of the sample
    times or arrays already sampled on the 2M+1 layout. ``y0`` may be a
    vector or an m x k matrix of initial columns.
    """

    interval: Tuple[float, float]
    coefficient: SampledField
    y0: np.ndarray
    forcing: Optional[SampledField] = None
    inner_steps: int = 16

    def __post_init__(self):
        a, b = float(self.interval[0]), float(self.interval[1])
        if not (np.isfinite(a) and np.isfinite(b)) or not b > a:
            raise InvalidArgumentError(f"empty interval [{a}, {b}]")
        if self.inner_steps < 1:
            raise InvalidArgumentError("inner_steps must be at least 1")
        y0 = np.array(self.y0, dtype=float)
        if y0.ndim not in (1, 2):
            raise InvalidArgumentError("y0 must be a vector or a matrix")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "y0", y0)

    @property
    def dim(self) -> int:
        return int(self.y0.shape[0])

    @property
    def times(self) -> np.ndarray:
        return sample_times(self.interval, self.inner_steps)

    def coefficient_samples(self) -> np.ndarray:
        shape = (2 * self.inner_steps + 1, self.dim, self.dim)
        return _sampled(self.coefficient, self.times, shape, "coefficient")

    def forcing_samples(self) -> Optional[np.ndarray]:
        if self.forcing is None:
            return None
        shape = (2 * self.inner_steps + 1,) + self.y0.shape
        return _sampled(self.forcing, self.times, shape, "forcing")


def _sampled(field, times, shape, what: str) -> np.ndarray:
    values = field(times) if callable(field) else field
    values = np.asarray(values, dtype=float)
    try:
        return np.broadcast_to(values, shape)
    except ValueError:
        raise InvalidArgumentError(
            f"{what} samples have shape {values.shape}, expected {shape}"
        ) from None


def solve_linear_ivp(ivp: LinearIVP) -> np.ndarray:
    """RK4 solution at the 2M+1 samples, shape (2M+1,) + y0.shape."""
    coefficient = ivp.coefficient_samples()
    forcing = ivp.forcing_samples()
    times = ivp.times
    steps = ivp.inner_steps
    h = (ivp.interval[1] - ivp.interval[0]) / steps

    def slope(i, y):
        f = coefficient[i] @ y
        if forcing is not None:
            f = f + forcing[i]
        return f

    samples = np.empty((2 * steps + 1,) + ivp.y0.shape)
    samples[0] = ivp.y0
    y = ivp.y0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            left, middle, right = 2 * k, 2 * k + 1, 2 * k + 2
            k1 = slope(left, y)
            k2 = slope(middle, y + 0.5 * h * k1)
            k3 = slope(middle, y + 0.5 * h * k2)
            k4 = slope(right, y + h * k3)
            y_next = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y_next)):
                logger.warning("integration_overflow", t=float(times[right]))
                raise IntegrationOverflowError(float(times[right]))
            f_next = slope(right, y_next)
            samples[middle] = 0.5 * (y + y_next) + h / 8.0 * (k1 - f_next)
            samples[right] = y_next
            y = y_next
    return samples


@dataclass(frozen=True, eq=False)
class FundamentalMatrix:
    """Samples of U(t) with U' = A(t) U, U(a) = I."""

    interval: Tuple[float, float]
    samples: np.ndarray

    @property
    def inner_steps(self) -> int:
        return (self.samples.shape[0] - 1) // 2

    @property
    def times(self) -> np.ndarray:
        return sample_times(self.interval, self.inner_steps)

    def norms(self) -> np.ndarray:
        return spectral_norm(self.samples)

    def inverse_norms(self) -> np.ndarray:
        return spectral_norm(np.linalg.inv(self.samples))


def fundamental_matrix(
    interval: Tuple[float, float],
    coefficient: SampledField,
    inner_steps: Optional[int] = None,
) -> FundamentalMatrix:
    inner_steps = inner_steps or settings.solver.inner_steps
    times = sample_times(interval, inner_steps)
    coefficient_samples = np.asarray(
        coefficient(times) if callable(coefficient) else coefficient,
        dtype=float,
    )
    m = coefficient_samples.shape[-1]
    ivp = LinearIVP(
        interval=interval,
        coefficient=coefficient_samples,
        y0=np.eye(m),
        inner_steps=inner_steps,
    )
    samples = solve_linear_ivp(ivp)
    determinants = np.linalg.det(samples)
    if np.any(determinants == 0) or not np.all(np.isfinite(determinants)):
        raise NumericalFailureError("fundamental matrix became singular")
    return FundamentalMatrix(interval=ivp.interval, samples=samples)


def cauchy_matrix(
    fundamental: FundamentalMatrix, t_index: int, xi_index: int
) -> np.ndarray:
    """K(t, xi) = U(t) U(xi)^-1 at two sample indices."""
    u_t = fundamental.samples[t_index]
    u_xi = fundamental.samples[xi_index]
    return np.linalg.solve(u_xi.T, u_t.T).T


def variation_of_constants(
    fundamental: FundamentalMatrix,
    forcing: SampledField,
    y0,
) -> np.ndarray:
    """u(t) = U(t) y0 + int_a^t K(t, xi) g(xi) dxi on the sample layout.

    The integral of U^-1 g is accumulated by composite Simpson quadrature.
    """
    samples = fundamental.samples
    m = samples.shape[-1]
    times = fundamental.times
    g = _sampled(forcing, times, (times.size, m), "forcing")
    weighted = np.linalg.solve(samples, g[..., None])[..., 0]
    spacing = times[1] - times[0]
    integral = cumulative_simpson(weighted, dx=spacing, axis=0, initial=0.0)
    y0 = np.asarray(y0, dtype=float)
    return np.einsum("sij,sj->si", samples, y0[None, :] + integral)


def reference_solve(
    spec: ProblemSpec,
    grid: Grid,
    inner_steps: Optional[int] = None,
    tol: Optional[float] = None,
) -> PiecewiseTrajectory:
    """Adaptive Dormand-Prince solution resampled onto the grid layout."""
    inner_steps = inner_steps or settings.solver.inner_steps
    tol = tol if tol is not None else settings.solver.reference_tol
    if not 1e-12 <= tol <= 1e-3:
        raise InvalidArgumentError(f"tol must lie in [1e-12, 1e-3], got {tol}")
    if grid.t0 != spec.t0:
        raise InvalidArgumentError(
            f"grid starts at {grid.t0} but the problem at {spec.t0}"
        )

    def rhs(t, u):
        return eval_N(spec, t, u) @ u + eval_phi(spec, t)

    with np.errstate(over="ignore", invalid="ignore"):
        result = solve_ivp(
            rhs,
            (grid.t0, grid.t_end),
            spec.initial_value,
            method="RK45",
            rtol=tol,
            atol=tol,
            dense_output=True,
        )
    if not result.success:
        logger.error(
            "reference_solve_failed", message=result.message, t=result.t[-1]
        )
        raise StiffnessError(
            f"reference integrator stopped at t={result.t[-1]:.17g}: "
            f"{result.message}"
        )
    times = inner_times(grid, inner_steps)
    values = result.sol(times.ravel()).T.reshape(times.shape + (spec.dim,))
    values[0, 0] = spec.initial_value
    values[1:, 0] = values[:-1, -1]
    if not np.all(np.isfinite(values)):
        raise StiffnessError("reference solution is not finite")
    logger.debug(
        "reference_solved", steps=int(result.t.size), nfev=int(result.nfev)
    )
    return PiecewiseTrajectory(grid, values)
