"""
Adomian polynomials by truncated power-series arithmetic in tau.

For a polynomial operator the n-th Adomian polynomial is the exact tau^n
coefficient of N(t, v0 + tau v1 + ... + tau^n vn). Each component of the
argument becomes a :class:`TauSeries`; monomials are products of powers of
those series, and the operator's coefficients are accumulated against the
monomial series.
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from fdode.exceptions import InvalidArgumentError
from fdode.services.expressions import TimeExpr, evaluate_on
from fdode.services.problem import Majorant, ProblemSpec, monomial


class TauSeries:
    """Truncated series sum_k tau^k c_k.

    ``coeffs`` has shape ``(order + 1, *batch)``; products act elementwise
    on the batch axes and are truncated at the lower order.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0:
            coeffs = coeffs[None]
        self.coeffs = coeffs

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def constant(cls, value, order: int) -> "TauSeries":
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros((order + 1,) + value.shape)
        coeffs[0] = value
        return cls(coeffs)

    def one_like(self) -> "TauSeries":
        coeffs = np.zeros_like(self.coeffs)
        coeffs[0] = 1.0
        return TauSeries(coeffs)

    def __add__(self, other) -> "TauSeries":
        if isinstance(other, TauSeries):
            order = min(self.order, other.order)
            return TauSeries(
                self.coeffs[: order + 1] + other.coeffs[: order + 1]
            )
        coeffs = self.coeffs.copy()
        coeffs[0] = coeffs[0] + other
        return TauSeries(coeffs)

    def __sub__(self, other) -> "TauSeries":
        if isinstance(other, TauSeries):
            return self + (-1.0) * other
        return self + (-other)

    def __mul__(self, other) -> "TauSeries":
        if not isinstance(other, TauSeries):
            return TauSeries(self.coeffs * other)
        order = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
        out = np.zeros((order + 1,) + shape)
        for k in range(order + 1):
            acc = a[0] * b[k]
            for i in range(1, k + 1):
                acc = acc + a[i] * b[k - i]
            out[k] = acc
        return TauSeries(out)

    __rmul__ = __mul__

    def power(self, exponent: int) -> "TauSeries":
        if exponent < 0:
            raise InvalidArgumentError("negative powers are not supported")
        result = self.one_like()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def evaluate(self, tau: float) -> np.ndarray:
        """Sum the truncated series at ``tau`` (Horner)."""
        total = np.zeros(self.coeffs.shape[1:])
        for k in range(self.order, -1, -1):
            total = total * tau + self.coeffs[k]
        return total


def _arguments(v, dim: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim < 2 or v.shape[-1] != dim:
        raise InvalidArgumentError(
            f"expected arguments v0..vn of length {dim}, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("Adomian arguments must be finite")
    return v


class _MonomialSeries:
    """Series of u^alpha for u = sum tau^i v_i, reusing component powers."""

    def __init__(self, v: np.ndarray):
        self.components = [TauSeries(v[..., p]) for p in range(v.shape[-1])]
        self._powers: Dict[Tuple[int, int], TauSeries] = {}

    def _power(self, p: int, exponent: int) -> TauSeries:
        key = (p, exponent)
        if key not in self._powers:
            self._powers[key] = self.components[p].power(exponent)
        return self._powers[key]

    def __call__(self, powers: Sequence[int]) -> TauSeries:
        result = None
        for p, exponent in enumerate(powers):
            if exponent == 0:
                continue
            factor = self._power(p, exponent)
            result = factor if result is None else result * factor
        if result is None:
            result = self.components[0].one_like()
        return result


def adomian_matrix(spec: ProblemSpec, t, v) -> np.ndarray:
    """A_0..A_n of N(t, .) at arguments ``v`` of shape (n+1, ..., m).

    Returns shape (n+1, ..., m, m); leading batch axes of ``v`` broadcast
    against ``t``.
    """
    v = _arguments(v, spec.dim)
    t = np.asarray(t, dtype=float)
    batch = np.broadcast_shapes(t.shape, v.shape[1:-1])
    v = np.broadcast_to(v, v.shape[:1] + batch + v.shape[-1:])
    series = _MonomialSeries(v)
    out = np.zeros((v.shape[0],) + batch + (spec.dim, spec.dim))
    for term in spec.terms:
        coefficients = series(term.powers).coeffs[..., None, None]
        out = out + coefficients * term.matrix(t)
    return out


def adomian_scalar(maj: Majorant, x) -> np.ndarray:
    """Adomian polynomials of the scalar majorant at x0..xn."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise InvalidArgumentError("need at least x0")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("Adomian arguments must be finite")
    argument = TauSeries(x)
    result = TauSeries.constant(
        np.full(x.shape[1:], maj.coeffs[-1]), argument.order
    )
    for b in reversed(maj.coeffs[:-1]):
        result = result * argument + b
    return result.coeffs


@dataclass(frozen=True)
class FieldTerm:
    powers: Tuple[int, ...]
    coeff: Tuple[TimeExpr, ...]

    def vector(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([evaluate_on(e, t) for e in self.coeff], axis=-1)


@dataclass(frozen=True)
class PolynomialField:
    """Vector field f(t, u) = sum_beta c_beta(t) u^beta."""

    dim: int
    terms: Tuple[FieldTerm, ...]

    def __post_init__(self):
        terms = tuple(self.terms)
        for term in terms:
            if len(term.powers) != self.dim or len(term.coeff) != self.dim:
                raise InvalidArgumentError(
                    f"field term {term.powers} does not match dim {self.dim}"
                )
        object.__setattr__(self, "terms", terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def evaluate(self, t, u) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        u = np.asarray(u, dtype=float)
        batch = np.broadcast_shapes(t.shape, u.shape[:-1])
        out = np.zeros(batch + (self.dim,))
        for term in self.terms:
            weight = monomial(u, term.powers)[..., None]
            out = out + term.vector(t) * weight
        return out


def adomian_vector_field(field: PolynomialField, t, v) -> np.ndarray:
    """A_0..A_n of a polynomial vector field, shape (n+1, ..., m)."""
    v = _arguments(v, field.dim)
    t = np.asarray(t, dtype=float)
    batch = np.broadcast_shapes(t.shape, v.shape[1:-1])
    v = np.broadcast_to(v, v.shape[:1] + batch + v.shape[-1:])
    out = np.zeros((v.shape[0],) + batch + (field.dim,))
    if field.is_zero:
        return out
    series = _MonomialSeries(v)
    for term in field.terms:
        coefficients = series(term.powers).coeffs[..., None]
        out = out + coefficients * term.vector(t)
    return out


def adomian_last_argument_split(spec: ProblemSpec, t, v) -> np.ndarray:
    """A_n(v0..vn) - A_n(v0..v_{n-1}, 0).

    For a polynomial operator this is the derivative of N at v0 along vn.
    """
    v = _arguments(v, spec.dim)
    if v.shape[0] < 2:
        raise InvalidArgumentError("the split needs n >= 1")
    truncated = v.copy()
    truncated[-1] = 0.0
    full = adomian_matrix(spec, t, v)[-1]
    return full - adomian_matrix(spec, t, truncated)[-1]
