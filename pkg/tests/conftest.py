import itertools

import numpy as np
import pytest

from fdode.services.expressions import constant, parse_expr
from fdode.services.problem import PolynomialTerm, ProblemSpec, load_problem


@pytest.fixture(scope="session")
def quadratic():
    return load_problem("paper_example")


@pytest.fixture(scope="session")
def linear_decay():
    return load_problem("linear_decay")


@pytest.fixture(scope="session")
def cubic():
    return load_problem("cubic_1d")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def constant_spec(matrix, u0=None, phi=None):
    """Problem with N(t, u) = matrix independent of t and u."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    m = matrix.shape[0]
    coeff = tuple(tuple(constant(x) for x in row) for row in matrix)
    return ProblemSpec(
        dim=m,
        t0=0.0,
        u0=tuple(u0 if u0 is not None else np.ones(m)),
        terms=(PolynomialTerm(powers=(0,) * m, coeff=coeff),),
        phi=tuple(constant(x) for x in (phi or np.zeros(m))),
    )


def random_spec(rng, dim, degree, n_terms, time_dependent=True):
    """Random polynomial operator with distinct multi-indices."""
    indices = [
        powers
        for powers in itertools.product(range(degree + 1), repeat=dim)
        if sum(powers) <= degree
    ]
    chosen = rng.choice(
        len(indices), size=min(n_terms, len(indices)), replace=False
    )
    terms = []
    for number, index in enumerate(sorted(chosen)):
        values = rng.uniform(-1.0, 1.0, (dim, dim))
        rows = []
        for r in range(dim):
            row = []
            for c in range(dim):
                value = float(values[r, c])
                expr = constant(value)
                if time_dependent and number == 0 and r == c == 0:
                    expr = parse_expr(f"sin(t) * {value!r}")
                row.append(expr)
            rows.append(tuple(row))
        terms.append(PolynomialTerm(powers=indices[index], coeff=tuple(rows)))
    return ProblemSpec(
        dim=dim,
        t0=0.0,
        u0=tuple(rng.uniform(-1.0, 1.0, dim)),
        terms=tuple(terms),
        phi=tuple(constant(0.0) for _ in range(dim)),
    )


@pytest.fixture
def make_random_spec(rng):
    def factory(dim=2, degree=2, n_terms=3, time_dependent=True):
        return random_spec(rng, dim, degree, n_terms, time_dependent)

    return factory
