import textwrap

import numpy as np
import pytest

from fdode.exceptions import InvalidArgumentError, ProblemFileError
from fdode.services.expressions import constant, parse_expr
from fdode.services.problem import (
    Majorant,
    PolynomialTerm,
    ProblemSpec,
    compute_majorant,
    eval_dN,
    eval_exact,
    eval_N,
    eval_phi,
    load_problem,
    parse_problem,
    serialize_problem,
)
from tests.conftest import constant_spec
from tests.oracles import brute_force_N, numeric_dN

MINIMAL = textwrap.dedent(
    """\
    dim = 1
    u0 = [1.0]
    phi = ["0"]

    [[term]]
    powers = [0]
    matrix = [["-1"]]
    """
)


def problem_error(text):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(textwrap.dedent(text))
    return info.value


@pytest.mark.parametrize(
    "source, t, expected",
    [
        ("2*sin(t) - sin(2*t)/2", 0.3, 2 * np.sin(0.3) - np.sin(0.6) / 2),
        ("exp(-t)", 1.0, np.exp(-1.0)),
        ("pow(t, 3)", 2.0, 8.0),
        ("pow(t, -2)", 2.0, 0.25),
        ("-(-t)", 0.7, 0.7),
        ("+4", 9.0, 4.0),
        (2.5, 1.0, 2.5),
    ],
)
def test_expression_evaluation(source, t, expected):
    assert parse_expr(source).evaluate(t) == pytest.approx(expected)


def test_expression_vectorised():
    expr = parse_expr("cos(t) * t")
    ts = np.linspace(0.0, 1.0, 7)
    np.testing.assert_allclose(expr.evaluate(ts), np.cos(ts) * ts)


@pytest.mark.parametrize(
    "source, kind",
    [
        ("tan(t)", "unknown-function"),
        ("x + 1", "syntax"),
        ("t ** 2", "syntax"),
        ("pow(t, 0.5)", "syntax"),
        ("sin(", "syntax"),
        ("", "syntax"),
        ("sin(t, t)", "syntax"),
        ("abs(t)", "unknown-function"),
        ("t.func", "syntax"),
        ("t ^ 2", "syntax"),
        ("1/0", "syntax"),
        ("pi * t", "syntax"),
    ],
)
def test_expression_errors(source, kind):
    with pytest.raises(ProblemFileError) as info:
        parse_expr(source)
    assert info.value.kind == kind


def test_expression_source_parses_back():
    for source in (
        "2*sin(t) - sin(2*t)/2 + cos(t)",
        "-t",
        "pow(t+1, -3)",
        "0.1*t - 2.6 + exp(1)",
        "sin(t)/pow(t, 2)",
        "-0.30000000000000004*cos(3*t)",
    ):
        expr = parse_expr(source)
        assert parse_expr(expr.source()) == expr


def test_parse_minimal_problem():
    spec = parse_problem(MINIMAL)
    assert spec.dim == 1
    assert spec.t0 == 0.0
    assert spec.u0 == (1.0,)
    assert spec.exact is None
    assert spec.majorant_coeffs is None
    assert not spec.depends_on_u


def test_bundled_quadratic_example(quadratic):
    assert quadratic.name == "paper_example"
    assert quadratic.dim == 2
    assert quadratic.degree == 2
    assert {term.powers for term in quadratic.terms} == {
        (0, 0),
        (1, 0),
        (0, 1),
        (2, 0),
        (0, 2),
    }
    assert quadratic.majorant_coeffs == (1.0, 2.0, 2.0)


def test_unknown_function_is_located():
    error = problem_error(
        """\
        dim = 1
        u0 = [1.0]
        phi = ["0"]

        [[term]]
        powers = [0]
        matrix = [["tan(t)"]]
        """
    )
    assert error.kind == "unknown-function"
    assert error.line == 7
    assert error.column == 13


def test_toml_syntax_error_is_located():
    error = problem_error(
        """\
        dim = 1
        u0 = [1.0,, 2.0]
        phi = ["0"]
        """
    )
    assert error.kind == "syntax"
    assert error.line == 2


def test_expression_syntax_error_is_located():
    error = problem_error(
        """\
        dim = 1
        u0 = [1.0]
        phi = ["sin("]

        [[term]]
        powers = [0]
        matrix = [["-1"]]
        """
    )
    assert error.kind == "syntax"
    assert error.line == 3


def test_dimension_mismatch():
    error = problem_error(
        """\
        dim = 1
        u0 = [1.0, 2.0]
        phi = ["0"]

        [[term]]
        powers = [0]
        matrix = [["-1"]]
        """
    )
    assert error.kind == "dimension"
    assert error.line == 2


def test_error_line_skips_blank_lines():
    error = problem_error(
        """\
        dim = 1


        u0 = [1.0, 2.0]
        phi = ["0"]

        [[term]]
        powers = [0]
        matrix = [["-1"]]
        """
    )
    assert error.kind == "dimension"
    assert error.line == 4


def test_matrix_dimension_mismatch():
    error = problem_error(
        """\
        dim = 2
        u0 = [1.0, 2.0]
        phi = ["0", "0"]

        [[term]]
        powers = [0, 0]
        matrix = [["-1", "0"]]
        """
    )
    assert error.kind == "dimension"
    assert error.line == 5


def test_duplicate_multi_index():
    error = problem_error(
        """\
        dim = 1
        u0 = [1.0]
        phi = ["0"]

        [[term]]
        powers = [1]
        matrix = [["-1"]]

        [[term]]
        powers = [1]
        matrix = [["2"]]
        """
    )
    assert error.kind == "duplicate-index"
    assert error.line == 9


@pytest.mark.parametrize(
    "text",
    [
        MINIMAL.replace('phi = ["0"]\n', ""),
        MINIMAL + "colour = 3\n",
        MINIMAL.replace("dim = 1", "dim = 0"),
        MINIMAL.replace("powers = [0]", "powers = [-1]"),
    ],
)
def test_validation_errors(text):
    with pytest.raises(ProblemFileError) as info:
        parse_problem(text)
    assert info.value.kind == "validation"


def test_eval_N_quadratic(quadratic):
    np.testing.assert_allclose(
        eval_N(quadratic, 0.0, [0.0, 1.0]), np.diag([-1.0, -2.0])
    )
    np.testing.assert_allclose(eval_N(quadratic, 3.0, [0.0, 0.0]), -np.eye(2))


def test_eval_N_broadcasts(quadratic, rng):
    ts = rng.uniform(0, 6, 8)
    us = rng.uniform(-2, 2, (8, 2))
    batched = eval_N(quadratic, ts, us)
    assert batched.shape == (8, 2, 2)
    for k in range(8):
        np.testing.assert_allclose(
            batched[k], brute_force_N(quadratic, ts[k], us[k]), atol=1e-14
        )


def test_eval_N_random_specs(make_random_spec, rng):
    for _ in range(20):
        spec = make_random_spec(dim=3, degree=3, n_terms=5)
        t = rng.uniform(0, 3)
        u = rng.uniform(-1.5, 1.5, 3)
        np.testing.assert_allclose(
            eval_N(spec, t, u), brute_force_N(spec, t, u), atol=1e-12
        )


def test_eval_dN_quadratic(quadratic):
    np.testing.assert_allclose(
        eval_dN(quadratic, 0.0, [0.0, 0.0], 0), np.diag([0.0, 1.0])
    )
    np.testing.assert_allclose(
        eval_dN(quadratic, 0.0, [0.0, 0.0], 1), np.diag([1.0, 0.0])
    )


def test_eval_dN_matches_differences(make_random_spec, rng):
    for _ in range(10):
        spec = make_random_spec(dim=2, degree=3, n_terms=4)
        t = rng.uniform(0, 3)
        u = rng.uniform(-1, 1, 2)
        for p in range(2):
            np.testing.assert_allclose(
                eval_dN(spec, t, u, p),
                numeric_dN(spec, t, u, p),
                rtol=1e-6,
                atol=1e-8,
            )


def test_eval_dN_without_u_dependence(linear_decay):
    assert not np.any(eval_dN(linear_decay, 1.0, [3.0, 4.0], 1))


@pytest.mark.parametrize("p", [-1, 2])
def test_eval_dN_index_range(quadratic, p):
    with pytest.raises(InvalidArgumentError):
        eval_dN(quadratic, 0.0, [0.0, 0.0], p)


def test_eval_N_rejects_wrong_dimension(quadratic):
    with pytest.raises(InvalidArgumentError):
        eval_N(quadratic, 0.0, [1.0, 2.0, 3.0])


def test_phi_and_exact(quadratic, linear_decay):
    np.testing.assert_allclose(eval_phi(quadratic, 0.0), [1.0, 2.0])
    np.testing.assert_allclose(eval_exact(quadratic, 0.0), [0.0, 1.0])
    np.testing.assert_array_equal(eval_phi(linear_decay, [0.5, 1.5]), 0.0)
    assert eval_exact(parse_problem(MINIMAL), 1.0) is None


def test_majorant_verbatim(quadratic):
    assert compute_majorant(quadratic, (0.0, 6.0)).coeffs == (1.0, 2.0, 2.0)


def test_majorant_of_constant_operator():
    spec = constant_spec([[3.0, 0.0], [0.0, -4.0]])
    majorant = compute_majorant(spec, (0.0, 1.0))
    assert majorant.coeffs == pytest.approx((4.0,))


def test_majorant_of_oscillating_coefficient():
    term = PolynomialTerm(
        powers=(1,),
        coeff=((parse_expr("2.0*sin(t)"),),),
    )
    spec = ProblemSpec(
        dim=1, t0=0.0, u0=(1.0,), terms=(term,), phi=(constant(0.0),)
    )
    majorant = compute_majorant(spec, (0.0, 2 * np.pi), samples=512)
    assert majorant.coeffs[0] == 0.0
    assert majorant.coeffs[1] == pytest.approx(2.0, rel=0.02)
    assert majorant.coeffs[1] >= 2.0


def test_majorant_dominates_operator(quadratic, make_random_spec, rng):
    specs = [quadratic] + [
        make_random_spec(dim=2, degree=3, n_terms=4) for _ in range(5)
    ]
    for spec in specs:
        majorant = compute_majorant(spec, (0.0, 6.0))
        ts = rng.uniform(0, 6, 1000)
        us = rng.uniform(-2, 2, (1000, spec.dim))
        norms = np.linalg.norm(eval_N(spec, ts, us), ord=2, axis=(-2, -1))
        bound = majorant(np.linalg.norm(us, axis=-1))
        assert np.all(norms <= bound * (1 + 1e-3) + 1e-12)


def test_majorant_validation():
    with pytest.raises(InvalidArgumentError):
        Majorant(())
    with pytest.raises(InvalidArgumentError):
        Majorant((1.0, -2.0))
    assert Majorant((1.0, 2.0, 2.0))(1.0) == 5.0


def test_serialize_round_trip(quadratic, make_random_spec):
    specs = [quadratic] + [make_random_spec(dim=2, degree=2) for _ in range(5)]
    for spec in specs:
        assert parse_problem(serialize_problem(spec)) == spec


def test_load_problem_from_path(tmp_path):
    path = tmp_path / "damped.toml"
    path.write_text(MINIMAL, encoding="utf-8")
    spec = load_problem(path)
    assert spec.name == "damped"
    assert spec.dim == 1


def test_load_unknown_problem():
    with pytest.raises(ProblemFileError):
        load_problem("no_such_problem")


def test_majorant_of_symmetric_constant_operator():
    spec = constant_spec([[2.6, -0.8], [-0.8, 1.4]])
    majorant = compute_majorant(spec, (0.0, 1.0))
    assert majorant.coeffs == pytest.approx((3.0,))
