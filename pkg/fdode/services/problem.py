"""
Problem definitions: the polynomial matrix operator N(t, u), the forcing,
initial data, the problem-file format and the scalar majorant.
"""

import json
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from config import settings
from fdode.exceptions import InvalidArgumentError, ProblemFileError
from fdode.logger import get_logger
from fdode.schemas import ProblemFile
from fdode.services.core import spectral_norm
from fdode.services.expressions import TimeExpr, evaluate_on, parse_expr

logger = get_logger(__name__)

BUNDLED_PROBLEMS = ("paper_example", "linear_decay", "cubic_1d")

_TOML_POSITION = re.compile(r"\(at line (\d+), column (\d+)\)")


@dataclass(frozen=True)
class PolynomialTerm:
    """One monomial u^powers with an m x m matrix of time coefficients."""

    powers: Tuple[int, ...]
    coeff: Tuple[Tuple[TimeExpr, ...], ...]

    def __post_init__(self):
        powers = tuple(int(p) for p in self.powers)
        coeff = tuple(tuple(row) for row in self.coeff)
        m = len(powers)
        if m == 0 or any(p < 0 for p in powers):
            raise InvalidArgumentError(
                "powers must be a non-empty multi-index of non-negative "
                "integers"
            )
        if len(coeff) != m or any(len(row) != m for row in coeff):
            raise InvalidArgumentError(
                f"coefficient of term {powers} must be {m}x{m}"
            )
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "coeff", coeff)

    @property
    def dim(self) -> int:
        return len(self.powers)

    @property
    def degree(self) -> int:
        return sum(self.powers)

    @cached_property
    def depends_on_t(self) -> bool:
        return any(e.depends_on_t for row in self.coeff for e in row)

    @cached_property
    def _constant(self) -> np.ndarray:
        matrix = np.array(
            [[float(e.evaluate(0.0)) for e in row] for row in self.coeff]
        )
        matrix.flags.writeable = False
        return matrix

    def matrix(self, t) -> np.ndarray:
        """Coefficient matrices at ``t``, shape ``t.shape + (m, m)``."""
        t = np.asarray(t, dtype=float)
        if not self.depends_on_t:
            return np.broadcast_to(self._constant, t.shape + self._shape)
        out = np.empty(t.shape + self._shape)
        for r, row in enumerate(self.coeff):
            for c, expr in enumerate(row):
                out[..., r, c] = evaluate_on(expr, t)
        return out

    @property
    def _shape(self) -> Tuple[int, int]:
        return (self.dim, self.dim)


@dataclass(frozen=True)
class ProblemSpec:
    """Cauchy problem u' - N(t, u) u = phi(t), u(t0) = u0."""

    dim: int
    t0: float
    u0: Tuple[float, ...]
    terms: Tuple[PolynomialTerm, ...]
    phi: Tuple[TimeExpr, ...]
    exact: Optional[Tuple[TimeExpr, ...]] = None
    majorant_coeffs: Optional[Tuple[float, ...]] = None
    name: Optional[str] = None

    def __post_init__(self):
        m = int(self.dim)
        if m < 1:
            raise InvalidArgumentError("dim must be positive")
        u0 = tuple(float(x) for x in self.u0)
        terms = tuple(self.terms)
        phi = tuple(self.phi)
        if len(u0) != m or len(phi) != m:
            raise InvalidArgumentError(f"u0 and phi must have length {m}")
        if not np.all(np.isfinite(u0)) or not np.isfinite(self.t0):
            raise InvalidArgumentError("t0 and u0 must be finite")
        if not terms:
            raise InvalidArgumentError("N needs at least one term")
        seen = set()
        for term in terms:
            if term.dim != m:
                raise InvalidArgumentError(
                    f"term {term.powers} does not match dim {m}"
                )
            if term.powers in seen:
                raise InvalidArgumentError(
                    f"duplicate multi-index {term.powers}"
                )
            seen.add(term.powers)
        exact = self.exact
        if exact is not None:
            exact = tuple(exact)
            if len(exact) != m:
                raise InvalidArgumentError(f"exact must have length {m}")
        majorant = self.majorant_coeffs
        if majorant is not None:
            majorant = tuple(float(b) for b in majorant)
            if not majorant or any(
                not np.isfinite(b) or b < 0 for b in majorant
            ):
                raise InvalidArgumentError(
                    "majorant coefficients must be finite and non-negative"
                )
        object.__setattr__(self, "dim", m)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "exact", exact)
        object.__setattr__(self, "majorant_coeffs", majorant)

    @property
    def degree(self) -> int:
        return max(term.degree for term in self.terms)

    @property
    def depends_on_u(self) -> bool:
        return any(term.degree > 0 for term in self.terms)

    @property
    def initial_value(self) -> np.ndarray:
        return np.array(self.u0)


@dataclass(frozen=True)
class Majorant:
    """Scalar polynomial sum_i B_i x^i with non-negative coefficients."""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(b) for b in self.coeffs)
        if not coeffs or any(not np.isfinite(b) or b < 0 for b in coeffs):
            raise InvalidArgumentError(
                "majorant coefficients must be finite and non-negative"
            )
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)


def monomial(u: np.ndarray, powers: Sequence[int]) -> np.ndarray:
    """u_1^{i_1} ... u_m^{i_m} over the last axis of ``u``."""
    return np.prod(np.power(u, np.asarray(powers)), axis=-1)


def _prepare(spec: ProblemSpec, t, u) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[-1] != spec.dim:
        raise InvalidArgumentError(
            f"u must have trailing length {spec.dim}, got shape {u.shape}"
        )
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(u))):
        raise InvalidArgumentError("t and u must be finite")
    return t, u


def eval_N(spec: ProblemSpec, t, u) -> np.ndarray:
    """N(t, u); broadcasts over leading axes of ``t`` and ``u``."""
    t, u = _prepare(spec, t, u)
    batch = np.broadcast_shapes(t.shape, u.shape[:-1])
    result = np.zeros(batch + (spec.dim, spec.dim))
    for term in spec.terms:
        weight = monomial(u, term.powers)[..., None, None]
        result = result + term.matrix(t) * weight
    return result


def eval_dN(spec: ProblemSpec, t, u, p: int) -> np.ndarray:
    """Partial derivative dN/du_p with ``p`` a 0-based component index."""
    if not 0 <= p < spec.dim:
        raise InvalidArgumentError(
            f"component index {p} outside [0, {spec.dim})"
        )
    t, u = _prepare(spec, t, u)
    batch = np.broadcast_shapes(t.shape, u.shape[:-1])
    result = np.zeros(batch + (spec.dim, spec.dim))
    for term in spec.terms:
        power = term.powers[p]
        if power == 0:
            continue
        lowered = list(term.powers)
        lowered[p] -= 1
        weight = power * monomial(u, lowered)[..., None, None]
        result = result + term.matrix(t) * weight
    return result


def _eval_vector(exprs: Sequence[TimeExpr], t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidArgumentError("t must be finite")
    return np.stack([evaluate_on(e, t) for e in exprs], axis=-1)


def eval_phi(spec: ProblemSpec, t) -> np.ndarray:
    return _eval_vector(spec.phi, t)


def eval_exact(spec: ProblemSpec, t) -> Optional[np.ndarray]:
    """Exact solution at ``t`` or ``None`` when the problem has none."""
    if spec.exact is None:
        return None
    return _eval_vector(spec.exact, t)


def check_range(t_range: Sequence[float]) -> Tuple[float, float]:
    a, b = float(t_range[0]), float(t_range[1])
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise InvalidArgumentError(f"empty or invalid range [{a}, {b}]")
    return a, b


def compute_majorant(
    spec: ProblemSpec,
    t_range: Sequence[float],
    samples: Optional[int] = None,
) -> Majorant:
    """Majorant coefficients B_p, verbatim from the problem if it has them.

    Otherwise B_p sums the sampled sup of ||coeff(t)|| over the terms of
    degree p. Sampled sups of time-dependent coefficients are inflated.
    """
    a, b = check_range(t_range)
    if spec.majorant_coeffs is not None:
        return Majorant(spec.majorant_coeffs)
    samples = samples or settings.sampling.t_samples
    if samples < 2:
        raise InvalidArgumentError("majorant needs at least 2 samples")
    ts = np.linspace(a, b, samples)
    coeffs = np.zeros(spec.degree + 1)
    for term in spec.terms:
        if term.depends_on_t:
            bound = float(np.max(spectral_norm(term.matrix(ts))))
            bound *= settings.sampling.inflation
        else:
            bound = float(spectral_norm(term.matrix(a)))
        coeffs[term.degree] += bound
    majorant = Majorant(tuple(coeffs))
    logger.debug("majorant_computed", coeffs=majorant.coeffs)
    return majorant


def _key_line(text: str, key: str, start: int = 0) -> Optional[int]:
    pattern = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.M)
    match = pattern.search(text, start)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1


def _term_offset(text: str, index: int) -> Optional[int]:
    header = re.compile(r"^[ \t]*\[\[term\]\]", re.M)
    offsets = [m.start() for m in header.finditer(text)]
    if index < len(offsets):
        return offsets[index]
    return None


def _locate(text: str, loc: Sequence[Union[str, int]]) -> Optional[int]:
    if not loc:
        return None
    if loc[0] == "term" and len(loc) > 1 and isinstance(loc[1], int):
        offset = _term_offset(text, loc[1])
        if offset is None:
            return None
        if len(loc) > 2 and isinstance(loc[2], str):
            line = _key_line(text, loc[2], offset)
            if line is not None:
                return line
        return text.count("\n", 0, offset) + 1
    return _key_line(text, str(loc[0]))


def _parse_located(source, text: str, line: Optional[int]) -> TimeExpr:
    try:
        return parse_expr(source)
    except ProblemFileError as exc:
        column = exc.column
        if isinstance(source, str):
            needle = source.strip()
            for number, content in enumerate(text.splitlines(), start=1):
                found = content.find(needle)
                if found >= 0:
                    line = number
                    if column is not None:
                        column += found
                    break
        raise ProblemFileError(
            exc.detail, kind=exc.kind, line=line, column=column
        ) from None


def _dimension_error(message: str, line: Optional[int]) -> ProblemFileError:
    return ProblemFileError(message, kind="dimension", line=line)


def _build_spec(model: ProblemFile, text: str) -> ProblemSpec:
    m = model.dim
    for key in ("u0", "phi", "exact"):
        values = getattr(model, key)
        if values is not None and len(values) != m:
            raise _dimension_error(
                f"{key} has length {len(values)}, expected {m}",
                _key_line(text, key),
            )

    terms = []
    seen = {}
    for index, entry in enumerate(model.term):
        offset = _term_offset(text, index)
        line = None if offset is None else text.count("\n", 0, offset) + 1
        powers = tuple(entry.powers)
        if len(powers) != m:
            raise _dimension_error(
                f"term {index + 1}: powers has length {len(powers)}, "
                f"expected {m}",
                line,
            )
        if len(entry.matrix) != m or any(
            len(row) != m for row in entry.matrix
        ):
            raise _dimension_error(
                f"term {index + 1}: matrix must be {m}x{m}", line
            )
        if powers in seen:
            raise ProblemFileError(
                f"multi-index {list(powers)} repeats term {seen[powers] + 1}",
                kind="duplicate-index",
                line=line,
            )
        seen[powers] = index
        coeff = tuple(
            tuple(_parse_located(src, text, line) for src in row)
            for row in entry.matrix
        )
        terms.append(PolynomialTerm(powers=powers, coeff=coeff))

    phi_line = _key_line(text, "phi")
    phi = tuple(_parse_located(src, text, phi_line) for src in model.phi)
    exact = None
    if model.exact is not None:
        exact_line = _key_line(text, "exact")
        exact = tuple(
            _parse_located(src, text, exact_line) for src in model.exact
        )
    return ProblemSpec(
        dim=m,
        t0=model.t0,
        u0=tuple(model.u0),
        terms=tuple(terms),
        phi=phi,
        exact=exact,
        majorant_coeffs=(
            None if model.majorant is None else tuple(model.majorant)
        ),
        name=model.name,
    )


def parse_problem(text: str) -> ProblemSpec:
    """Parse and validate problem-file text."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        message = str(exc)
        match = _TOML_POSITION.search(message)
        line = column = None
        if match:
            line, column = int(match.group(1)), int(match.group(2))
            message = message[: match.start()].strip()
        raise ProblemFileError(
            message, kind="syntax", line=line, column=column
        ) from None
    try:
        model = ProblemFile.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        where = ".".join(str(part) for part in error["loc"])
        raise ProblemFileError(
            f"{where}: {error['msg']}",
            kind="validation",
            line=_locate(text, error["loc"]),
        ) from None
    return _build_spec(model, text)


def _toml_string(expr: TimeExpr) -> str:
    return json.dumps(expr.source())


def _toml_list(values: Sequence[str]) -> str:
    return "[" + ", ".join(values) + "]"


def serialize_problem(spec: ProblemSpec) -> str:
    """Canonical problem-file text; parsing it gives back ``spec``."""
    lines = []
    if spec.name is not None:
        lines.append(f"name = {json.dumps(spec.name)}")
    lines.append(f"dim = {spec.dim}")
    lines.append(f"t0 = {spec.t0!r}")
    lines.append(f"u0 = {_toml_list([repr(x) for x in spec.u0])}")
    lines.append(f"phi = {_toml_list([_toml_string(e) for e in spec.phi])}")
    if spec.exact is not None:
        exact = [_toml_string(e) for e in spec.exact]
        lines.append(f"exact = {_toml_list(exact)}")
    if spec.majorant_coeffs is not None:
        majorant = [repr(b) for b in spec.majorant_coeffs]
        lines.append(f"majorant = {_toml_list(majorant)}")
    for term in spec.terms:
        lines.append("")
        lines.append("[[term]]")
        lines.append(f"powers = {_toml_list([str(p) for p in term.powers])}")
        lines.append("matrix = [")
        for row in term.coeff:
            lines.append(f"    {_toml_list([_toml_string(e) for e in row])},")
        lines.append("]")
    return "\n".join(lines) + "\n"


def load_problem(name_or_path: Union[str, Path]) -> ProblemSpec:
    """Load a problem file by path or by bundled name."""
    path = Path(name_or_path)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        source = str(path)
    elif str(name_or_path) in BUNDLED_PROBLEMS:
        resource = resources.files("fdode.problems") / f"{name_or_path}.toml"
        text = resource.read_text(encoding="utf-8")
        source = f"bundled:{name_or_path}"
    else:
        raise ProblemFileError(
            f"no problem file or bundled problem named {str(name_or_path)!r}",
            kind="validation",
        )
    spec = parse_problem(text)
    if spec.name is None:
        spec = replace(spec, name=path.stem)
    logger.info(
        "problem_loaded",
        source=source,
        dim=spec.dim,
        terms=len(spec.terms),
        degree=spec.degree,
    )
    return spec
