from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveInt,
    field_validator,
)

from fdode.services.core import Grid

ExprSource = Union[str, float]


class TermEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    powers: List[NonNegativeInt]
    matrix: List[List[ExprSource]]


class ProblemFile(BaseModel):
    """Raw problem file as read from TOML, before expression parsing."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    description: Optional[str] = None
    dim: PositiveInt
    t0: float = 0.0
    u0: List[float]
    term: List[TermEntry] = Field(..., min_length=1)
    phi: List[ExprSource]
    exact: Optional[List[ExprSource]] = None
    majorant: Optional[List[NonNegativeFloat]] = None


class FdRunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rank: NonNegativeInt
    grid: Grid
    inner_steps: PositiveInt = 16

    @property
    def t_end(self) -> float:
        return self.grid.t_end


class AdmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    linear_split: Tuple[Tuple[float, ...], ...]
    rank: NonNegativeInt
    t_end: float
    inner_steps: PositiveInt = 512

    @field_validator("linear_split")
    @classmethod
    def _square(cls, value):
        size = len(value)
        if size == 0 or any(len(row) != size for row in value):
            raise ValueError("linear split must be a square matrix")
        return value


class AlphaEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    t: float
    u: Tuple[float, ...]
    samples: int
    seed: int


class MuBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: float
    mu1: float


class StepBound(BaseModel):
    model_config = ConfigDict(frozen=True)

    h_bar: float
    gamma1: float
    gamma2: float


class HypothesisReport(BaseModel):
    """Estimates and verdicts for the convergence hypotheses."""

    problem: Optional[str] = None
    t_range: Tuple[float, float]
    region: Tuple[float, float]
    samples: int
    seed: int
    majorant_coeffs: Tuple[float, ...]
    alpha: float
    alpha_t: float
    alpha_u: Tuple[float, ...]
    kappa: float
    kappa_bound: float
    kappa_range_dependent: bool = False
    epsilon1: float
    mu: Optional[float] = None
    mu1: Optional[float] = None
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    h_bar: Optional[float] = None
    condition1_ok: bool
    condition2_ok: bool
    condition3_ok: bool
    notes: List[str] = Field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return self.condition1_ok and self.condition2_ok and self.condition3_ok


class DivergenceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: Literal["diverging", "converging", "inconclusive"]
    term_norms: Tuple[float, ...]
    window: Tuple[float, float]


class RunManifest(BaseModel):
    command: str
    parameters: Dict[str, Union[str, int, float, bool, None, List[float]]]
    tool_version: str
    duration_s: float = 0.0
    results: Dict[str, Optional[float]] = Field(default_factory=dict)
    files: List[str] = Field(default_factory=list)
