from datetime import datetime
from fractions import Fraction
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _check_rational(value: str) -> str:
    try:
        Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {value!r}") from exc
    return value


class TargetIntervalSchema(BaseModel):
    lo: str
    hi: str = "2/sqrt(3)"

    @field_validator("lo")
    @classmethod
    def lo_is_rational(cls, value: str) -> str:
        return _check_rational(value)

    @field_validator("hi")
    @classmethod
    def hi_is_rational_or_critical(cls, value: str) -> str:
        return value if value == "2/sqrt(3)" else _check_rational(value)


class TargetsFile(BaseModel):
    """Either explicit ``targets`` or the ``lambda``/``halfwidth``/``n`` shorthand."""

    targets: Optional[List[TargetIntervalSchema]] = None
    lambda_: Optional[str] = Field(default=None, alias="lambda")
    halfwidth: Optional[str] = None
    n: Optional[int] = None
    branch: Optional[str] = None

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def one_form(self) -> "TargetsFile":
        if (self.targets is None) == (self.lambda_ is None):
            raise ValueError("give either targets or lambda")
        if self.lambda_ is not None and self.n is None:
            raise ValueError("the lambda form needs n")
        return self


class BestApproxRecordOut(BaseModel):
    n: int
    q: str
    p: List[str]
    R2: str
    V_over_pi: Optional[str] = None
    ambiguous: bool = False
    degenerate: bool = False


class Best2Summary(BaseModel):
    v: List[str]
    q_max: int
    records: int
    max_product: Optional[str] = None
    max_product_approx: Optional[str] = None
    max_index: Optional[int] = None
    below_four_over_pi: bool
    below_two_over_sqrt3: bool
    degenerate: bool


class StepCertificateOut(BaseModel):
    n: int
    branch: Optional[int] = None
    side: Optional[int] = None
    k: Optional[int] = None
    k_guaranteed: Optional[int] = None
    epsilon: Optional[str] = None
    lambda_star: Optional[str] = None
    properties: Dict[str, bool] = Field(default_factory=dict)
    R2: List[str] = Field(default_factory=list)
    V_over_pi: List[str] = Field(default_factory=list)
    drift2: Optional[str] = None
    engines: Dict[str, str] = Field(default_factory=dict)
    lateral_boundary: Dict[str, List[List[str]]] = Field(default_factory=dict)
    b2: Optional[bool] = None


class ResultBundle(BaseModel):
    version: int = 1
    branch: str
    n_steps: int
    targets: List[TargetIntervalSchema]
    points: List[List[str]]
    v: List[str]
    error_bound: str
    all_certified: bool
    certificates: List[StepCertificateOut]


class DivergenceReport(BaseModel):
    bit: int
    branch_clear: str
    branch_set: str
    first_difference: Optional[int] = None
    distinct: bool
    distance2: str
    v_clear: List[str]
    v_set: List[str]


class VerifyReport(BaseModel):
    status: str
    depth: Optional[int] = None
    failed_step: Optional[int] = None
    failed_property: Optional[int] = None
    failed_name: Optional[str] = None
    mismatch_index: Optional[int] = None
    error_bound: Optional[str] = None
    drift: Optional[float] = None
    detail: str = ""


class SampleSummary(BaseModel):
    count: int
    q_max: int
    seed: int
    products: int
    max_product: Optional[float] = None
    above_two_over_sqrt3: int
    above_four_over_pi: int


class RunLogOut(BaseModel):
    id: int
    subcommand: str
    arguments: Dict[str, Any]
    exit_code: int
    summary: Optional[Dict[str, Any]] = None
    created_at: datetime

    model_config = ConfigDict(from_attributes=True)
