"""
Grids, sampled piecewise trajectories and the trajectory norms.

Every trajectory lives on an outer grid t0 < t1 < ... < tn and carries, on
each interval [t_{i-1}, t_i], 2M+1 uniformly spaced samples (endpoints and
midpoints of the M fourth-order Runge-Kutta steps included). Neighbouring
intervals share the junction sample exactly.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple

import numpy as np

from config import settings
from fdode.exceptions import InvalidArgumentError, OutOfRangeError

NormMode = Literal["value", "derivative"]

_NODE_SNAP = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Grid:
    """Outer grid: ``t0`` and the nodes t1 < ... < tn."""

    t0: float
    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(np.atleast_1d(self.nodes))
        if nodes.ndim != 1 or nodes.size == 0:
            raise InvalidArgumentError("grid needs at least one node")
        if not np.all(np.isfinite(nodes)) or not np.isfinite(self.t0):
            raise InvalidArgumentError("grid nodes must be finite")
        edges = np.concatenate(([self.t0], nodes))
        if np.any(np.diff(edges) <= 0):
            raise InvalidArgumentError(
                "grid nodes must be strictly increasing and exceed t0"
            )
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "nodes", nodes)

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate(([self.t0], self.nodes))

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def h_max(self) -> float:
        return float(self.steps.max())

    @property
    def n_intervals(self) -> int:
        return int(self.nodes.size)

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    def interval(self, i: int) -> Tuple[float, float]:
        edges = self.edges
        return float(edges[i]), float(edges[i + 1])

    def same_as(self, other: "Grid") -> bool:
        return other is self or (
            self.t0 == other.t0 and np.array_equal(self.nodes, other.nodes)
        )


def make_uniform_grid(t0: float, t_end: float, h: float) -> Grid:
    """Uniform grid with step ``h``; the last step is shortened if needed."""
    if not np.isfinite(h) or h <= 0:
        raise InvalidArgumentError(f"grid step must be positive, got {h}")
    if not (np.isfinite(t0) and np.isfinite(t_end)) or t_end <= t0:
        raise InvalidArgumentError(
            f"empty interval [{t0}, {t_end}] for the grid"
        )
    ratio = (t_end - t0) / h
    whole = round(ratio)
    if whole >= 1 and abs(ratio - whole) <= 1e-9 * max(1.0, ratio):
        nodes = np.linspace(t0, t_end, whole + 1)[1:]
    else:
        count = int(np.floor(ratio))
        nodes = t0 + h * np.arange(1, count + 1)
        if count == 0 or t_end - nodes[-1] > 1e-9 * h:
            nodes = np.append(nodes, t_end)
        else:
            nodes[-1] = t_end
    nodes[-1] = t_end
    return Grid(t0=t0, nodes=nodes)


def inner_times(grid: Grid, inner_steps: int) -> np.ndarray:
    """Sample times, shape (n_intervals, 2M+1), endpoints exact."""
    if inner_steps < 1:
        raise InvalidArgumentError("inner_steps must be at least 1")
    edges = grid.edges
    a, b = edges[:-1, None], edges[1:, None]
    fractions = np.linspace(0.0, 1.0, 2 * inner_steps + 1)[None, :]
    times = a + (b - a) * fractions
    times[:, 0] = edges[:-1]
    times[:, -1] = edges[1:]
    return times


def unique_sample_mask(shape: Tuple[int, int]) -> np.ndarray:
    """Mask over (n_intervals, 2M+1) dropping the repeated junctions."""
    keep = np.ones(shape, dtype=bool)
    keep[1:, 0] = False
    return keep


@dataclass(frozen=True, eq=False)
class PiecewiseTrajectory:
    """One vector-valued function sampled interval by interval.

    ``samples`` has shape (n_intervals, 2M+1, dim).
    """

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.ndim != 3 or samples.shape[0] != self.grid.n_intervals:
            raise InvalidArgumentError(
                "samples must have shape (n_intervals, 2M+1, dim), "
                f"got {samples.shape}"
            )
        if samples.shape[1] < 3 or samples.shape[1] % 2 == 0:
            raise InvalidArgumentError(
                "each interval needs an odd number (>= 3) of samples"
            )
        if not np.array_equal(samples[1:, 0], samples[:-1, -1]):
            raise InvalidArgumentError(
                "adjacent intervals must share the junction value"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self) -> int:
        return int(self.samples.shape[2])

    @property
    def inner_steps(self) -> int:
        return (self.samples.shape[1] - 1) // 2

    @property
    def times(self) -> np.ndarray:
        return inner_times(self.grid, self.inner_steps)

    @property
    def spacing(self) -> np.ndarray:
        """Inner sample spacing per interval."""
        return self.grid.steps / (2 * self.inner_steps)

    def left_value(self, i: int) -> np.ndarray:
        return self.samples[i, 0]

    def final_value(self) -> np.ndarray:
        return self.samples[-1, -1]

    def same_layout(self, other: "PiecewiseTrajectory") -> bool:
        return (
            self.samples.shape == other.samples.shape
            and self.grid.same_as(other.grid)
        )

    def flatten(self) -> Tuple[np.ndarray, np.ndarray]:
        """Times and values with the duplicated junction samples dropped."""
        times = self.times
        keep = unique_sample_mask(times.shape)
        return times[keep], self.samples[keep]

    def __add__(self, other: "PiecewiseTrajectory") -> "PiecewiseTrajectory":
        if not self.same_layout(other):
            raise InvalidArgumentError("trajectories have different layouts")
        return PiecewiseTrajectory(self.grid, self.samples + other.samples)

    def __sub__(self, other: "PiecewiseTrajectory") -> "PiecewiseTrajectory":
        if not self.same_layout(other):
            raise InvalidArgumentError("trajectories have different layouts")
        return PiecewiseTrajectory(self.grid, self.samples - other.samples)


@dataclass(frozen=True, eq=False)
class SeriesSolution:
    """Series terms u^(0..p) sharing one layout."""

    terms: Tuple[PiecewiseTrajectory, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise InvalidArgumentError("a series needs at least one term")
        head = terms[0]
        for term in terms[1:]:
            if not head.same_layout(term):
                raise InvalidArgumentError(
                    "series terms must share grid, dim and inner steps"
                )
        object.__setattr__(self, "terms", terms)

    @property
    def rank(self) -> int:
        return len(self.terms) - 1

    @property
    def grid(self) -> Grid:
        return self.terms[0].grid

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    @property
    def inner_steps(self) -> int:
        return self.terms[0].inner_steps


def trajectory_from_function(
    grid: Grid, inner_steps: int, fn, dim: Optional[int] = None
) -> PiecewiseTrajectory:
    """Sample a vectorised ``fn(times) -> (..., dim)`` on the layout."""
    times = inner_times(grid, inner_steps)
    values = np.array(fn(times), dtype=float)
    if dim is not None and values.shape[-1] != dim:
        raise InvalidArgumentError("function returned the wrong dimension")
    values = values.reshape(times.shape + (values.shape[-1],))
    values[1:, 0] = values[:-1, -1]
    return PiecewiseTrajectory(grid, values)


def _fd_slopes(values: np.ndarray, spacing: float) -> np.ndarray:
    """Second-order finite-difference slopes at every sample of a row."""
    slopes = np.empty_like(values)
    slopes[1:-1] = (values[2:] - values[:-2]) / (2.0 * spacing)
    slopes[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (
        2.0 * spacing
    )
    slopes[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (
        2.0 * spacing
    )
    return slopes


def trajectory_eval(traj: PiecewiseTrajectory, t: float) -> np.ndarray:
    """Dense output: stored sample on a node, cubic Hermite elsewhere."""
    grid = traj.grid
    edges = grid.edges
    if not np.isfinite(t) or t < edges[0] or t > edges[-1]:
        raise OutOfRangeError(
            f"t={t} outside trajectory domain [{edges[0]}, {edges[-1]}]"
        )
    index = int(np.searchsorted(edges, t, side="left"))
    if edges[index] == t:
        if index == 0:
            return traj.samples[0, 0].copy()
        return traj.samples[index - 1, -1].copy()

    i = index - 1
    a, b = edges[i], edges[i + 1]
    last = 2 * traj.inner_steps
    position = (t - a) / (b - a) * last
    j = min(int(np.floor(position)), last - 1)
    theta = position - j
    row = traj.samples[i]
    if theta < _NODE_SNAP:
        return row[j].copy()
    if theta > 1.0 - _NODE_SNAP:
        return row[j + 1].copy()

    spacing = (b - a) / last
    slopes = _fd_slopes(row, spacing)
    t2, t3 = theta * theta, theta * theta * theta
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + theta
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    return (
        h00 * row[j]
        + h10 * spacing * slopes[j]
        + h01 * row[j + 1]
        + h11 * spacing * slopes[j + 1]
    )


def trajectory_eval_many(
    traj: PiecewiseTrajectory, ts: Sequence[float]
) -> np.ndarray:
    return np.array([trajectory_eval(traj, float(t)) for t in ts])


def _window_mask(
    times: np.ndarray, grid: Grid, window: Optional[Sequence[float]]
) -> np.ndarray:
    if window is None:
        return np.ones(times.shape, dtype=bool)
    a, b = float(window[0]), float(window[1])
    if not a < b:
        raise InvalidArgumentError(f"empty window [{a}, {b})")
    if a < grid.t0 or b > grid.t_end:
        raise OutOfRangeError(
            f"window [{a}, {b}) outside [{grid.t0}, {grid.t_end}]"
        )
    mask = (times >= a) & (times < b)
    if b >= grid.t_end:
        mask |= times == b
    return mask


def trajectory_sup_norm(
    traj: PiecewiseTrajectory,
    mode: NormMode = "value",
    window: Optional[Sequence[float]] = None,
) -> float:
    """Sampled sup of ||u|| (``value``) or of ||u'|| (``derivative``)."""
    times = traj.times
    if mode == "value":
        norms = np.linalg.norm(traj.samples, axis=-1)
        mask = _window_mask(times, traj.grid, window)
    elif mode == "derivative":
        spacing = traj.spacing[:, None, None]
        slopes = np.diff(traj.samples, axis=1) / spacing
        norms = np.linalg.norm(slopes, axis=-1)
        mask = _window_mask(times[:, :-1], traj.grid, window)
    else:
        raise InvalidArgumentError(f"unknown norm mode {mode!r}")
    if not mask.any():
        raise InvalidArgumentError("window contains no samples")
    return float(norms[mask].max())


def spectral_norm(
    matrices: np.ndarray,
    iterations: Optional[int] = None,
    tol: Optional[float] = None,
) -> np.ndarray:
    """Batched operator 2-norm by the power method on A^T A.

    Each unit basis vector starts one column of the iteration; the
    largest column estimate is returned.
    """
    iterations = iterations or settings.sampling.power_iterations
    tol = tol if tol is not None else settings.sampling.power_tol
    a = np.asarray(matrices, dtype=float)
    gram = np.swapaxes(a, -1, -2) @ a
    m = a.shape[-1]
    x = np.broadcast_to(np.eye(m), a.shape[:-2] + (m, m)).copy()
    estimate = np.zeros(a.shape[:-2])
    for _ in range(iterations):
        y = gram @ x
        length = np.linalg.norm(y, axis=-2)
        previous = estimate
        estimate = np.einsum("...ik,...ik->...k", x, y).max(axis=-1)
        nonzero = length > 0
        scale = np.where(nonzero, length, 1.0)[..., None, :]
        x = np.where(nonzero[..., None, :], y / scale, x)
        change = np.abs(estimate - previous)
        if np.all(change <= tol * np.maximum(estimate, 1.0)):
            break
    return np.linalg.norm(a @ x, axis=-2).max(axis=-1)
