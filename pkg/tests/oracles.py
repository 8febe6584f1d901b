"""
Independent reference computations used only by the tests.

The Adomian oracle evaluates the classical partition formula

    A_n = sum over (k_1..k_n) with sum_i i k_i = n of
          1 / (k_1! ... k_n!) * D^{k_1+...+k_n} N(v0)[v1^k1, ..., vn^kn]

with derivatives of the monomials taken exactly. It shares no code with
the series arithmetic in ``fdode.services.adomian``.
"""

import itertools
import math
from collections import Counter

import numpy as np

from fdode.exceptions import UnsupportedError
from fdode.services.problem import eval_N

MAX_ORDER = 8


def partitions(n):
    """Tuples (k_1..k_n) with sum_i i * k_i = n."""

    def extend(prefix, part, remaining):
        if part > n:
            if remaining == 0:
                yield tuple(prefix)
            return
        for count in range(remaining // part + 1):
            yield from extend(
                prefix + [count], part + 1, remaining - part * count
            )

    yield from extend([], 1, n)


def _monomial_partial(powers, u0, components):
    """d^k / du_{c1} ... du_{ck} of u^powers at u0."""
    counts = Counter(components)
    value = 1.0
    for p, alpha in enumerate(powers):
        beta = counts.get(p, 0)
        if beta > alpha:
            return 0.0
        value *= math.factorial(alpha) / math.factorial(alpha - beta)
        value *= u0[p] ** (alpha - beta)
    return value


def _derivative(terms, u0, directions):
    """D^k N(u0)[w_1, ..., w_k] for terms [(powers, matrix), ...]."""
    m = len(u0)
    out = np.zeros((m, m))
    if not directions:
        for powers, matrix in terms:
            out += matrix * _monomial_partial(powers, u0, ())
        return out
    for components in itertools.product(range(m), repeat=len(directions)):
        weight = 1.0
        for w, c in zip(directions, components):
            weight *= w[c]
        if weight == 0.0:
            continue
        for powers, matrix in terms:
            factor = _monomial_partial(powers, u0, components)
            if factor:
                out += matrix * (factor * weight)
    return out


def partition_adomian(terms, v):
    """A_0..A_n for a single argument list ``v`` of shape (n+1, m)."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0] - 1
    if n > MAX_ORDER:
        raise UnsupportedError(f"oracle supports n <= {MAX_ORDER}")
    m = v.shape[1]
    result = np.zeros((n + 1, m, m))
    result[0] = _derivative(terms, v[0], [])
    for order in range(1, n + 1):
        for ks in partitions(order):
            directions = []
            scale = 1.0
            for index, k in enumerate(ks, start=1):
                directions += [v[index]] * k
                scale /= math.factorial(k)
            result[order] += scale * _derivative(terms, v[0], directions)
    return result


def spec_terms(spec, t):
    return [(term.powers, term.matrix(t)) for term in spec.terms]


def adomian_oracle(spec, t, v):
    """Partition-formula A_0..A_n of N(t, .) at one time ``t``."""
    return partition_adomian(spec_terms(spec, float(t)), v)


def scalar_adomian_oracle(coeffs, x):
    """Partition-formula Adomian polynomials of sum_i B_i x^i."""
    terms = [((i,), np.array([[b]])) for i, b in enumerate(coeffs)]
    x = np.asarray(x, dtype=float)[:, None]
    return partition_adomian(terms, x)[:, 0, 0]


def assemble_F_oracle(spec, prior, j, i):
    """Forcing F^(j) on interval ``i`` assembled sample by sample.

    Every Adomian polynomial comes from the partition oracle and the three
    sums are written out literally.
    """
    times = prior[0].times[i]
    samples = len(times)
    m = spec.dim
    out = np.zeros((samples, m))
    left = [term.samples[i, 0] for term in prior]
    for s in range(samples):
        t = times[s]
        now = [term.samples[i, s] for term in prior]

        def at_left(order, pad=False):
            args = left[: order + 1]
            if pad:
                args = left[:order] + [np.zeros(m)]
            return adomian_oracle(spec, t, np.array(args))[order]

        def at_now(order):
            return adomian_oracle(spec, t, np.array(now[: order + 1]))[order]

        total = np.zeros(m)
        for p in range(1, j):
            total += at_left(j - p) @ now[p]
        for p in range(j):
            k = j - 1 - p
            total += (at_now(k) - at_left(k)) @ now[p]
        total += at_left(j, pad=True) @ now[0]
        out[s] = total
    return out


def brute_force_N(spec, t, u):
    """N(t, u) summed term by term with python scalars."""
    m = spec.dim
    out = np.zeros((m, m))
    for term in spec.terms:
        weight = 1.0
        for p, power in enumerate(term.powers):
            weight *= float(u[p]) ** power
        out += term.matrix(float(t)) * weight
    return out


def numeric_dN(spec, t, u, p, step=1e-6):
    shift = np.zeros(spec.dim)
    shift[p] = step
    forward = eval_N(spec, t, np.asarray(u) + shift)
    backward = eval_N(spec, t, np.asarray(u) - shift)
    return (forward - backward) / (2.0 * step)
