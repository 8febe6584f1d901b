"""
Coefficient expressions in the time variable ``t``.

The grammar is small: real literals, ``t``, the binary operators
``+ - * /``, unary minus and the functions ``sin``, ``cos``, ``exp`` and
``pow(base, integer)``. Sources are parsed with sympy against a whitelist
of names, evaluated through ``lambdify`` over numpy arrays of times and
printed back in the same grammar.
"""

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Union

import numpy as np
import sympy as sp
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr as sympy_parse
from sympy.parsing.sympy_parser import standard_transformations
from sympy.printing.str import StrPrinter

from fdode.exceptions import ProblemFileError

Number = Union[float, np.ndarray]

T = sp.Symbol("t")

_ALLOWED = re.compile(r"[0-9A-Za-z.+\-*/(), \t]*")
_FORBIDDEN = (
    (re.compile(r"\*\*"), "use pow(base, n) instead of '**'"),
    (re.compile(r"//"), "unsupported operator '//'"),
    (re.compile(r"(?<![0-9])\.(?![0-9])"), "attribute access"),
)

# names the sympy transformations emit into the generated code
_GLOBALS = {
    "Symbol": sp.Symbol,
    "Function": sp.Function,
    "Integer": sp.Integer,
    "Float": sp.Float,
    "Rational": sp.Rational,
}

_NOT_FINITE = (sp.zoo, sp.oo, -sp.oo, sp.nan)


def _integer_power(base, exponent):
    exponent = sp.sympify(exponent)
    if not exponent.is_Integer:
        raise ProblemFileError("pow() exponent must be an integer literal")
    return sp.Pow(base, exponent)


def _locals() -> dict:
    return {
        "t": T,
        "sin": sp.sin,
        "cos": sp.cos,
        "exp": sp.exp,
        "pow": _integer_power,
    }


class _SourcePrinter(StrPrinter):
    """sstr with shortest round-trip floats and ``pow`` for powers."""

    def _print_Float(self, expr):
        return repr(float(expr))

    def _print_Exp1(self, expr):
        return "exp(1)"

    def _print_Pow(self, expr, rational=False):
        base = self._print(expr.base)
        return f"pow({base}, {self._print(expr.exp)})"


_printer = _SourcePrinter()


@dataclass(frozen=True)
class TimeExpr:
    """A sympy expression in ``t`` with a cached numpy evaluator."""

    expr: sp.Expr

    @cached_property
    def _function(self):
        return sp.lambdify(T, self.expr, "numpy")

    def evaluate(self, t: Number) -> Number:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._function(np.asarray(t, dtype=float))

    def source(self) -> str:
        return _printer.doprint(self.expr)

    @property
    def depends_on_t(self) -> bool:
        return T in self.expr.free_symbols

    def __str__(self) -> str:
        return self.source()


def _doubles(expr: sp.Expr) -> sp.Expr:
    """Pin every float literal to its double value."""
    floats = expr.atoms(sp.Float)
    if not floats:
        return expr
    return expr.xreplace({f: sp.Float(float(f)) for f in floats})


def constant(value: float) -> TimeExpr:
    return TimeExpr(sp.Float(float(value)))


def add(left: TimeExpr, right: TimeExpr) -> TimeExpr:
    return TimeExpr(_doubles(left.expr + right.expr))


def is_zero(expr: TimeExpr) -> bool:
    return bool(expr.expr.is_zero)


def evaluate_on(expr: TimeExpr, t: Number) -> np.ndarray:
    """Evaluate and broadcast to the shape of ``t``."""
    return np.broadcast_to(
        np.asarray(expr.evaluate(t), dtype=float), np.shape(t)
    )


def _column(text: str, name: str, call: bool) -> Optional[int]:
    pattern = rf"\b{re.escape(name)}\b" + (r"\s*\(" if call else "")
    match = re.search(pattern, text)
    return None if match is None else match.start() + 1


def _check_text(text: str) -> None:
    allowed = _ALLOWED.match(text)
    if allowed.end() < len(text):
        raise ProblemFileError(
            f"unsupported character {text[allowed.end()]!r}",
            column=allowed.end() + 1,
        )
    for pattern, message in _FORBIDDEN:
        match = pattern.search(text)
        if match is not None:
            raise ProblemFileError(message, column=match.start() + 1)


def _check_tree(expr: sp.Expr, text: str) -> None:
    calls = sorted(expr.atoms(AppliedUndef), key=str)
    if calls:
        name = calls[0].func.__name__
        raise ProblemFileError(
            f"unknown function {name!r}",
            kind="unknown-function",
            column=_column(text, name, call=True),
        )
    symbols = sorted(expr.free_symbols - {T}, key=str)
    if symbols:
        name = symbols[0].name
        raise ProblemFileError(
            f"unknown variable {name!r}",
            column=_column(text, name, call=False),
        )
    if expr.has(*_NOT_FINITE):
        raise ProblemFileError("expression is not finite")


def parse_expr(source: Union[str, int, float]) -> TimeExpr:
    """Parse an expression source; numbers are accepted as literals."""
    if isinstance(source, bool):
        raise ProblemFileError("booleans are not expressions")
    if isinstance(source, (int, float)):
        return constant(source)
    text = source.strip()
    if not text:
        raise ProblemFileError("empty expression")
    _check_text(text)
    try:
        parsed = sympy_parse(
            text,
            local_dict=_locals(),
            global_dict=dict(_GLOBALS),
            transformations=standard_transformations,
        )
    except ProblemFileError:
        raise
    except SyntaxError as exc:
        raise ProblemFileError(exc.msg or "invalid expression") from None
    except Exception as exc:
        raise ProblemFileError(f"invalid expression: {exc}") from None
    if not isinstance(parsed, sp.Expr):
        raise ProblemFileError("not an arithmetic expression")
    _check_tree(parsed, text)
    return TimeExpr(_doubles(parsed))
