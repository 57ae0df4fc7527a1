"""
Report models for verification runs and experiments

All reports are pydantic models; `dump_report` turns them into plain JSON-safe
dictionaries (infinities as strings, integral floats as ints).
"""
import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class MonotonicityReport(BaseModel):
    handle: str
    trials: int
    empty_value: float
    violations: List[Dict[str, Any]] = Field(default_factory=list)
    passed: bool


class SubadditivityReport(BaseModel):
    handle: str
    kind: str  # "subadditive" or "strong"
    trials: int
    max_excess: float
    violations: List[Dict[str, Any]] = Field(default_factory=list)
    passed: bool


class EquivalenceSample(BaseModel):
    label: str
    size: int
    capacity: float
    content: float
    ratio: Optional[float] = None
    skipped: bool = False


class EquivalenceReport(BaseModel):
    handle: str
    samples: List[EquivalenceSample] = Field(default_factory=list)
    skipped: int = 0
    cubes_checked: int = 0
    min_ratio: Optional[float] = None
    max_ratio: Optional[float] = None
    witnesses: List[Dict[str, Any]] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    verdict: str


class PackingConditionReport(BaseModel):
    handle: str
    constant: float
    trials: int
    families: int
    max_ratio: float
    witness: Optional[Dict[str, Any]] = None
    verdict: str


class PackingCheckReport(BaseModel):
    constant: float
    cubes_checked: int
    cover_ok: bool
    packing_violations: List[Dict[str, Any]] = Field(default_factory=list)
    ancestor_violations: List[Dict[str, Any]] = Field(default_factory=list)
    ancestors_disjoint: bool
    passed: bool


class PackingIntegralReport(BaseModel):
    lhs: float
    rhs: float
    constant: float
    passed: bool


class TheoremConstants(BaseModel):
    """Constant bundle shared by the verification harness"""
    A0: Optional[float] = None
    M0: Optional[float] = None
    D: Optional[float] = None
    D0: Optional[float] = None
    Cprime: Optional[float] = None
    cprime: Optional[float] = None
    C_jn: Optional[float] = None
    c_jn: Optional[float] = None
    C_decay: Optional[float] = None
    c_decay: Optional[float] = None
    witnesses: Dict[str, Any] = Field(default_factory=dict)


class ExperimentReport(BaseModel):
    experiment: str
    inputs_digest: str
    constants: Dict[str, Any] = Field(default_factory=dict)
    measurements: List[Dict[str, Any]] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
    verdict: str
    runtime_ms: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def verdict(flag: bool) -> str:
    return "pass" if flag else "fail"


def clean_value(value: Any) -> Any:
    """Recursively make a value JSON-safe and stable"""
    if isinstance(value, BaseModel):
        return clean_value(value.model_dump())
    if isinstance(value, dict):
        return {str(k): clean_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean_value(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if hasattr(value, "item") and not isinstance(value, (list, dict)):
        value = value.item()
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if value.is_integer() and abs(value) < 2 ** 53:
            return int(value)
        return value
    if hasattr(value, "to_dict"):
        return clean_value(value.to_dict())
    return value


def dump_report(report: BaseModel, timing: bool = False) -> Dict[str, Any]:
    data = clean_value(report)
    if not timing:
        data.pop("runtime_ms", None)
    return data
