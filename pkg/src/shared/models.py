# src/shared/models.py - wire models for problem files and reports
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Backend(str, Enum):
    MATRIX = "matrix"
    FUNCTION = "function"
    GRADED = "graded"


class Command(str, Enum):
    POLAR = "polar"
    PINV = "pinv"
    BTRANSFORM = "btransform"
    INV_BTRANSFORM = "inv-btransform"
    VERIFY_THM31 = "verify-thm31"
    CHECK_COMPLEMENTED = "check-complemented"
    CLOSED_RANGE = "closed-range"
    CLASSIFY = "classify"
    GRADED_REPORT = "graded-report"
    SELFTEST = "selftest"


class ReportStatus(str, Enum):
    COMPLETE = "complete"
    FAILED = "failed"


class Certificate(BaseModel):
    """Witness that a zero set is not clopen: an exact point of Z(f) in cl{f != 0}."""

    entry: int = Field(..., ge=1, description="1-based diagonal entry index")
    point: str = Field(..., description="Exact rational point as 'p/q'")
    reason: str = Field(default="isolated_root", description="isolated_root or interval_boundary")

    model_config = ConfigDict(frozen=True)


# =================== PROBLEM FILES ===================

# [re, im]
ComplexPair = Tuple[float, float]
BlockPayload = List[List[ComplexPair]]
AlgElementPayload = List[BlockPayload]


class MatrixOperatorPayload(BaseModel):
    entries: List[List[AlgElementPayload]] = Field(..., description="k x m array of algebra elements")

    model_config = ConfigDict(extra="forbid")


class PiecePayload(BaseModel):
    lo: str
    hi: str
    num: List[str] = Field(..., min_length=1, description="Numerator coefficients, lowest degree first")
    den: List[str] = Field(default_factory=lambda: ["1"], min_length=1)

    model_config = ConfigDict(extra="forbid")


class PwRationalPayload(BaseModel):
    poly: Optional[List[str]] = Field(default=None, description="Single polynomial on the whole domain")
    pieces: Optional[List[PiecePayload]] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _one_form(self):
        if (self.poly is None) == (self.pieces is None):
            raise ValueError("exactly one of 'poly' or 'pieces' is required")
        return self


class FunctionOperatorPayload(BaseModel):
    entries: List[PwRationalPayload] = Field(..., description="Diagonal entries")

    model_config = ConfigDict(extra="forbid")


class GradedOperatorPayload(BaseModel):
    components: Optional[List[MatrixOperatorPayload]] = None
    family: Optional[str] = Field(default=None, pattern="^(inv_n|n|identity)$")
    count: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _one_form(self):
        if (self.components is None) == (self.family is None):
            raise ValueError("exactly one of 'components' or 'family' is required")
        return self


class ProblemOptions(BaseModel):
    tol: Optional[float] = Field(default=None, gt=0)
    rank_tol: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = Field(default=None, ge=0)
    components: Optional[int] = Field(default=None, ge=1)
    inverse_norm_threshold: Optional[float] = Field(default=None, gt=0)
    singular_value_threshold: Optional[float] = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid")


class ProblemFile(BaseModel):
    backend: Backend
    profile: Optional[List[int]] = Field(default=None, description="Block sizes n_i (matrix/graded)")
    domain: Optional[List[Tuple[str, str]]] = Field(default=None, description="Closed intervals (function)")
    domain_rank: int = Field(..., ge=0)
    codomain_rank: Optional[int] = Field(default=None, ge=0)
    operator: Dict[str, Any]
    options: ProblemOptions = Field(default_factory=ProblemOptions)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _algebra_descriptor(self):
        if self.backend == Backend.FUNCTION:
            if not self.domain:
                raise ValueError("function backend requires a nonempty 'domain'")
        elif not self.profile:
            raise ValueError(f"{self.backend.value} backend requires a nonempty 'profile'")
        return self

    @property
    def target_rank(self) -> int:
        return self.domain_rank if self.codomain_rank is None else self.codomain_rank


# =================== REPORTS ===================

class ReportError(BaseModel):
    code: str
    message: str


class Report(BaseModel):
    command: str
    backend: Optional[str] = None
    source: Optional[str] = None
    status: ReportStatus = ReportStatus.COMPLETE
    verdicts: Dict[str, bool] = Field(default_factory=dict)
    residuals: Dict[str, float] = Field(default_factory=dict)
    payload: Dict[str, Any] = Field(default_factory=dict)
    certificate: Optional[Certificate] = None
    errors: List[ReportError] = Field(default_factory=list)
    stats: Optional[Dict[str, Any]] = None
    exit_code: int = 0

    @field_validator("residuals")
    @classmethod
    def _non_negative(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, residual in value.items():
            if not residual >= 0:
                raise ValueError(f"residual '{name}' must be non-negative, got {residual}")
        return value
