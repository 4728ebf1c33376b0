"""
Pydantic models for shortcut-audit

Defines the domain records, the simulation parameter types and every report
that is serialized to JSON.
"""

import math
from datetime import date, datetime
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

RESERVED_COLUMNS = ("exam_id", "patient_id", "score", "label")


# Enums
class Laterality(str, Enum):
    LEFT = "Left"
    RIGHT = "Right"

    @classmethod
    def parse(cls, raw: str) -> "Laterality":
        key = raw.strip().lower()
        if key in ("l", "left"):
            return cls.LEFT
        if key in ("r", "right"):
            return cls.RIGHT
        raise ValueError(f"laterality must be Left/Right (or L/R), got {raw!r}")


class ExamLabel(str, Enum):
    CANCER = "cancer"
    NON_CANCER = "non_cancer"
    UNKNOWN = "unknown"


class BiopsyOutcome(str, Enum):
    MALIGNANT = "malignant"
    BENIGN_OR_HIGH_RISK = "benign_or_high_risk"


# Ingestion records
class ImageScoreRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_id: str = Field(..., min_length=1)
    exam_id: str = Field(..., min_length=1)
    laterality: Laterality
    view: str = ""
    score: float = Field(..., ge=0.0, le=1.0)

    @field_validator("score")
    @classmethod
    def validate_score(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError(f"score must be finite, got {v}")
        return v


class ExamRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    exam_id: str = Field(..., min_length=1)
    patient_id: str = ""
    score: float = Field(..., ge=0.0, le=1.0)
    label: ExamLabel
    attributes: Dict[str, str] = Field(default_factory=dict)

    @field_validator("score")
    @classmethod
    def validate_score(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError(f"score must be finite, got {v}")
        return v


class BiopsyEvent(BaseModel):
    date: date
    outcome: BiopsyOutcome


class FollowupAssessment(BaseModel):
    date: date
    birads: int = Field(..., ge=0, le=6)


class ExamHistory(BaseModel):
    exam_date: date
    biopsy_events: List[BiopsyEvent] = Field(default_factory=list)
    followup_assessments: List[FollowupAssessment] = Field(default_factory=list)


class AttributeSpec(BaseModel):
    name: str = Field(..., min_length=1)
    values: List[str]
    high_prevalence_value: Optional[str] = None

    @model_validator(mode="after")
    def check_values(self) -> "AttributeSpec":
        if self.name in RESERVED_COLUMNS:
            raise ValueError(f"attribute name {self.name!r} collides with a reserved exam column")
        if len(set(self.values)) < 2:
            raise ValueError(f"attribute {self.name!r} needs at least 2 distinct values")
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"attribute {self.name!r} lists a value twice")
        if self.high_prevalence_value is not None and self.high_prevalence_value not in self.values:
            raise ValueError(
                f"high_prevalence_value {self.high_prevalence_value!r} of {self.name!r} is not one of {self.values}"
            )
        return self


class AttributeSchema(BaseModel):
    attributes: List[AttributeSpec]

    @model_validator(mode="after")
    def check_unique(self) -> "AttributeSchema":
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        return self

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.attributes]

    def get(self, name: str) -> Optional[AttributeSpec]:
        for spec in self.attributes:
            if spec.name == name:
                return spec
        return None


class SchemaViolation(BaseModel):
    exam_id: str
    attribute: str
    problem: str
    value: Optional[str] = None


class ValidationReport(BaseModel):
    violations: List[SchemaViolation] = Field(default_factory=list)

    @computed_field
    @property
    def valid(self) -> bool:
        return not self.violations


class PopulationRow(BaseModel):
    attribute: str
    value: str
    exams: int
    labeled_exams: int
    unknown_exams: int
    cancers: int
    patients: int


# Metrics
class ConfidenceInterval(BaseModel):
    point: float
    lower: float
    upper: float
    replicates: int = Field(..., ge=1)
    level: float = Field(..., gt=0.0, lt=1.0)
    discarded_degenerate: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_order(self) -> "ConfidenceInterval":
        if self.lower > self.upper:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self

    @property
    def half_width(self) -> float:
        return (self.upper - self.lower) / 2


class AucEstimate(BaseModel):
    """An AUC with its CI, or an explicit undefined marker."""

    ci: Optional[ConfidenceInterval] = None
    n_positive: int = 0
    n_negative: int = 0
    undefined_reason: Optional[str] = None

    @property
    def defined(self) -> bool:
        return self.ci is not None

    @property
    def point(self) -> Optional[float]:
        return self.ci.point if self.ci is not None else None


# Simulation
class SamplingMix(BaseModel):
    p0: float = Field(..., ge=0.0, le=1.0)
    p1: float = Field(..., ge=0.0, le=1.0)


class BinormalSpec(BaseModel):
    target_auc: float = Field(..., gt=0.0, lt=1.0)
    bias_m: float = 0.0
    prevalence_set0: float = Field(..., gt=0.0, lt=1.0)
    prevalence_set1: float = Field(..., gt=0.0, lt=1.0)
    n_set0: int = Field(..., ge=1)
    n_set1: int = Field(..., ge=1)
    seed: int = Field(0, ge=0)

    @computed_field
    @property
    def separation_a(self) -> float:
        from .modules.binormal.binormal import separation_from_auc

        return separation_from_auc(self.target_auc)


class SweepCell(BaseModel):
    coords: Dict[str, float]
    mean_delta: float
    std_delta: float
    repetitions: int
    mean_p0: float
    mean_p1: float
    analytic_delta: float


class SweepGrid(BaseModel):
    mode: str
    axes: Dict[str, List[float]]
    crossing_axis: str
    repetitions: int
    cells: List[SweepCell]

    @model_validator(mode="after")
    def check_cells(self) -> "SweepGrid":
        expected = 1
        for values in self.axes.values():
            expected *= len(values)
        if len(self.cells) != expected:
            raise ValueError(f"grid has {len(self.cells)} cells, axes imply {expected}")
        return self


class ZeroCrossing(BaseModel):
    coords: Dict[str, float]
    axis: str
    value: float


# Audit reports
class PrevalenceRow(BaseModel):
    value: str
    prevalence: float
    positive_count: int
    total_count: int


class PrevalenceTable(BaseModel):
    attribute: str
    rows: List[PrevalenceRow]
    empty_values: List[str] = Field(default_factory=list)


class ScoreSummary(BaseModel):
    value: str
    label: ExamLabel
    count: int
    mean: float
    q1: float
    median: float
    q3: float


class KsEntry(BaseModel):
    label: ExamLabel
    value_a: str
    value_b: str
    statistic: float = Field(..., ge=0.0, le=1.0)


class DistributionComparison(BaseModel):
    attribute: str
    summaries: List[ScoreSummary]
    ks: List[KsEntry]
    absent_cells: List[Tuple[str, ExamLabel]] = Field(default_factory=list)


class BiasGapReport(BaseModel):
    attribute: str
    high_value: str
    high_value_source: str
    aligned_auc: AucEstimate
    conflicting_auc: AucEstimate
    gap: Optional[float] = None


class StratumAuc(BaseModel):
    value: str
    estimate: AucEstimate


class StratifiedAucReport(BaseModel):
    attribute: str
    strata: List[StratumAuc]
    combined: AucEstimate
    paradox_flag: bool
    undefined_strata: List[str] = Field(default_factory=list)
    group: Optional[Dict[str, str]] = None


class CompositionPoint(BaseModel):
    fraction: float
    n_from_b: int
    mean_auc: Optional[float] = None
    std_auc: Optional[float] = None
    defined_subsets: int = 0
    undefined_reason: Optional[str] = None


class CompositionCurve(BaseModel):
    attribute: str
    value_a: str
    value_b: str
    subset_size: int
    subsets_per_point: int
    points: List[CompositionPoint]
    group: Optional[Dict[str, str]] = None


class AuditReport(BaseModel):
    attribute: str
    prevalence: PrevalenceTable
    distribution: DistributionComparison
    bias_gap: Optional[BiasGapReport] = None
    stratified: Optional[StratifiedAucReport] = None
    composition: Optional[CompositionCurve] = None
    stratified_within: List[StratifiedAucReport] = Field(default_factory=list)
    composition_within: List[CompositionCurve] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)


# Probe
class FeatureVectorRecord(BaseModel):
    id: str
    vector: List[float]
    attribute_label: int = Field(..., ge=0, le=1)

    @field_validator("vector")
    @classmethod
    def validate_vector(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("feature vector is empty")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("feature vector has non-finite entries")
        return v


class ProbeModel(BaseModel):
    weights: List[float]
    intercept: float
    l2_penalty: float = Field(..., ge=0.0)
    iterations_run: int
    feature_mean: List[float]
    feature_scale: List[float]
    loss_trace: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_dimensions(self) -> "ProbeModel":
        d = len(self.weights)
        if len(self.feature_mean) != d or len(self.feature_scale) != d:
            raise ValueError("weights, feature_mean and feature_scale must share one dimension")
        if any(s <= 0 for s in self.feature_scale):
            raise ValueError("feature_scale entries must be positive")
        return self

    @property
    def dimension(self) -> int:
        return len(self.weights)


class ProbeReport(BaseModel):
    auc: AucEstimate
    n_train: int
    n_test: int
    dimension: int
    l2_penalty: float
    iterations_run: int
    final_loss: float


# Mitigation
class WeightRow(BaseModel):
    exam_id: str
    weight: float = Field(..., gt=0.0)


class WeightCell(BaseModel):
    value: str
    label: ExamLabel
    count: int
    mass: float
    per_record_weight: float


class SamplingWeightTable(BaseModel):
    attribute: str
    rows: List[WeightRow]
    cells: List[WeightCell]


# Manifests and documents
class RunManifest(BaseModel):
    command: str
    tool_version: str
    seed: int
    input_digests: Dict[str, str] = Field(default_factory=dict)
    schema_digest: Optional[str] = None
    parameters: Dict[str, object] = Field(default_factory=dict)
    created_at: Optional[datetime] = None


class AuditDocument(BaseModel):
    """Top-level report.json of the audit command."""

    manifest: RunManifest
    schema_value_order: Dict[str, List[str]]
    reports: List[AuditReport]


class SimulationDocument(BaseModel):
    manifest: RunManifest
    grid: SweepGrid
    zero_crossings: List[ZeroCrossing]


class ProbeDocument(BaseModel):
    manifest: RunManifest
    report: ProbeReport
    model: ProbeModel


class WeightsDocument(BaseModel):
    manifest: RunManifest
    attribute: str
    semantics: str
    cells: List[WeightCell]
    reference_draws: int
    expected_draws: List[Dict[str, object]] = Field(default_factory=list)
