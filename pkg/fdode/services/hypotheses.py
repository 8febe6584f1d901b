"""
Sampled estimates for the convergence conditions of the FD method.

Every supremum here is taken over seeded random samples, so the results
are numerical evidence and never certificates.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from config import get_seed, settings
from fdode.exceptions import (
    HypothesisViolatedError,
    InvalidArgumentError,
    NumericalFailureError,
)
from fdode.logger import get_logger
from fdode.schemas import AlphaEstimate, HypothesisReport, MuBounds, StepBound
from fdode.services.core import spectral_norm
from fdode.services.fdm import upsilon
from fdode.services.problem import (
    ProblemSpec,
    check_range,
    compute_majorant,
    eval_N,
    eval_phi,
)

logger = get_logger(__name__)


def jacobian(spec: ProblemSpec, t, u) -> np.ndarray:
    """Jacobian of u -> N(t, u) u."""
    return eval_N(spec, t, u) + upsilon(spec, t, u, u)


def max_symmetric_eigenvalue(spec: ProblemSpec, t, u) -> np.ndarray:
    """Largest eigenvalue of (J + J^T) / 2, batched over (t, u)."""
    j = jacobian(spec, t, u)
    symmetric = 0.5 * (j + np.swapaxes(j, -1, -2))
    try:
        return np.linalg.eigvalsh(symmetric)[..., -1]
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            f"symmetric eigenvalue solver failed: {exc}"
        ) from None


def _region(region: Optional[Sequence[float]]) -> Tuple[float, float]:
    region = region if region is not None else settings.hypotheses.region
    lo, hi = float(region[0]), float(region[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidArgumentError(f"empty region [{lo}, {hi}]")
    return lo, hi


def estimate_alpha(
    spec: ProblemSpec,
    region: Optional[Sequence[float]],
    t_range: Sequence[float],
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> AlphaEstimate:
    """alpha = -max lambda_max(J_s) over samples of t_range x region^m."""
    samples = samples or settings.sampling.alpha_samples
    if samples < 100:
        raise InvalidArgumentError("alpha estimate needs >= 100 samples")
    seed = get_seed() if seed is None else seed
    lo, hi = _region(region)
    a, b = check_range(t_range)
    rng = np.random.default_rng(seed)
    ts = rng.uniform(a, b, samples)
    us = rng.uniform(lo, hi, (samples, spec.dim))
    eigenvalues = max_symmetric_eigenvalue(spec, ts, us)
    worst = int(np.argmax(eigenvalues))
    estimate = AlphaEstimate(
        alpha=float(-eigenvalues[worst]),
        t=float(ts[worst]),
        u=tuple(float(x) for x in us[worst]),
        samples=samples,
        seed=seed,
    )
    logger.info(
        "alpha_estimated",
        alpha=estimate.alpha,
        t=estimate.t,
        u=estimate.u,
        samples=samples,
    )
    return estimate


def _kappa_samples(spec: ProblemSpec, t_range, samples):
    samples = samples or settings.sampling.t_samples
    if samples < 2:
        raise InvalidArgumentError("kappa estimate needs >= 2 samples")
    a, b = check_range(t_range)
    return np.linalg.norm(eval_phi(spec, np.linspace(a, b, samples)), axis=-1)


def estimate_kappa(
    spec: ProblemSpec,
    t_range: Sequence[float],
    samples: Optional[int] = None,
) -> float:
    """Sampled sup of ||phi(t)||."""
    return float(_kappa_samples(spec, t_range, samples).max())


def kappa_bound(kappa: float) -> float:
    """Forcing bound fed into mu and h_bar: the sampled sup, inflated."""
    return kappa * settings.sampling.inflation


def kappa_range_dependent(
    spec: ProblemSpec,
    t_range: Sequence[float],
    samples: Optional[int] = None,
) -> bool:
    """True when ||phi|| peaks at an end of the sampled range."""
    norms = _kappa_samples(spec, t_range, samples)
    if norms.max() == norms.min():
        return False
    return int(np.argmax(norms)) in (0, norms.size - 1)


def compute_mu(
    u0_norm: float, kappa: float, alpha: float, epsilon1: float
) -> MuBounds:
    if alpha <= 0:
        raise HypothesisViolatedError(
            "dissipativity constant must be positive", deficit=-alpha
        )
    if epsilon1 <= 0:
        raise InvalidArgumentError("epsilon1 must be positive")
    base = max(u0_norm, kappa / alpha)
    return MuBounds(mu=base + epsilon1, mu1=base + 0.5 * epsilon1)


def step_bound(
    alpha: float,
    mu: float,
    mu1: float,
    kappa: float,
    gamma1: float,
    gamma2: float,
) -> float:
    """h_bar = (alpha mu1 - kappa) / (gamma2 (gamma1 mu + kappa))."""
    margin = alpha * mu1 - kappa
    if margin <= 0:
        raise HypothesisViolatedError(
            "alpha * mu1 must exceed kappa", deficit=-margin
        )
    if gamma2 == 0:
        return float("inf")
    return margin / (gamma2 * (gamma1 * mu + kappa))


def _ball(rng, count: int, dim: int, radius: float) -> np.ndarray:
    directions = _sphere(rng, count, dim)
    radii = radius * rng.uniform(0.0, 1.0, count) ** (1.0 / dim)
    radii[count // 2 :] = radius
    return directions * radii[:, None]


def _sphere(rng, count: int, dim: int) -> np.ndarray:
    points = rng.standard_normal((count, dim))
    lengths = np.linalg.norm(points, axis=-1, keepdims=True)
    return points / np.where(lengths > 0, lengths, 1.0)


def estimate_hbar(
    spec: ProblemSpec,
    mu: float,
    mu1: float,
    kappa: float,
    alpha: float,
    t_range: Sequence[float],
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    directions: Optional[int] = None,
) -> StepBound:
    """gamma1, gamma2 sampled over the ball of radius mu, then h_bar."""
    margin = alpha * mu1 - kappa
    if margin <= 0:
        raise HypothesisViolatedError(
            "alpha * mu1 must exceed kappa", deficit=-margin
        )
    samples = samples or settings.sampling.ball_samples
    directions = directions or settings.sampling.sphere_directions
    seed = get_seed() if seed is None else seed
    a, b = check_range(t_range)
    rng = np.random.default_rng(seed)
    ts = rng.uniform(a, b, samples)
    us = _ball(rng, samples, spec.dim, mu)
    vs = _sphere(rng, directions, spec.dim)
    inflation = settings.sampling.inflation

    gamma1 = float(spectral_norm(eval_N(spec, ts, us)).max()) * inflation
    if spec.depends_on_u:
        gains = upsilon(spec, ts[:, None], us[:, None, :], vs[None, :, :])
        gamma2 = mu * float(spectral_norm(gains).max()) * inflation
    else:
        gamma2 = 0.0
    h_bar = step_bound(alpha, mu, mu1, kappa, gamma1, gamma2)
    logger.info(
        "step_bound_estimated", gamma1=gamma1, gamma2=gamma2, h_bar=h_bar
    )
    return StepBound(h_bar=h_bar, gamma1=gamma1, gamma2=gamma2)


def hypothesis_report(
    spec: ProblemSpec,
    t_range: Sequence[float],
    region: Optional[Sequence[float]] = None,
    epsilon1: Optional[float] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> HypothesisReport:
    """Run every estimator and record the verdicts."""
    epsilon1 = epsilon1 or settings.hypotheses.epsilon1
    samples = samples or settings.sampling.alpha_samples
    seed = get_seed() if seed is None else seed
    t_range = check_range(t_range)
    region = _region(region)
    notes = []

    majorant = compute_majorant(spec, t_range)
    notes.append(
        "condition 1: N is polynomial in u with majorant coefficients "
        + ", ".join(f"{b:.6g}" for b in majorant.coeffs)
    )
    kappa = estimate_kappa(spec, t_range)
    bound = kappa_bound(kappa)
    range_dependent = kappa_range_dependent(spec, t_range)
    if range_dependent:
        notes.append(
            "kappa peaks at an end of the sampled time range; "
            "it depends on the truncation"
        )
    alpha = estimate_alpha(spec, region, t_range, samples, seed)
    condition3_ok = alpha.alpha > 0
    if not condition3_ok:
        notes.append(
            "condition 3 fails: the symmetrised Jacobian has eigenvalue "
            f"{-alpha.alpha:.6g} at t={alpha.t:.6g}, u={list(alpha.u)}"
        )

    fields = {}
    if condition3_ok:
        u0_norm = float(np.linalg.norm(spec.initial_value))
        bounds = compute_mu(u0_norm, bound, alpha.alpha, epsilon1)
        fields.update(mu=bounds.mu, mu1=bounds.mu1)
        try:
            step = estimate_hbar(
                spec,
                bounds.mu,
                bounds.mu1,
                bound,
                alpha.alpha,
                t_range,
                seed=seed,
            )
            fields.update(
                gamma1=step.gamma1, gamma2=step.gamma2, h_bar=step.h_bar
            )
        except HypothesisViolatedError as exc:
            notes.append(str(exc))

    report = HypothesisReport(
        problem=spec.name,
        t_range=t_range,
        region=region,
        samples=samples,
        seed=seed,
        majorant_coeffs=majorant.coeffs,
        alpha=alpha.alpha,
        alpha_t=alpha.t,
        alpha_u=alpha.u,
        kappa=kappa,
        kappa_bound=bound,
        kappa_range_dependent=range_dependent,
        epsilon1=epsilon1,
        condition1_ok=True,
        condition2_ok=bool(np.isfinite(bound)),
        condition3_ok=condition3_ok,
        notes=notes,
        **fields,
    )
    logger.info(
        "hypotheses_checked",
        problem=spec.name,
        alpha=report.alpha,
        kappa=report.kappa,
        h_bar=report.h_bar,
        all_ok=report.all_ok,
    )
    return report
