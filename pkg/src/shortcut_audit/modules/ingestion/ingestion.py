"""
Ingestion module: parse prediction, metadata, history and schema files,
aggregate image scores to exam scores and apply the ground-truth labeling
rules.
"""

import csv
import json
import logging
import math
from collections import OrderedDict
from datetime import timedelta
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from pydantic import ValidationError

from ...exceptions import InputValidationError, SchemaViolationError
from ...frames import ExamsLike, as_frame, attribute_columns, exams_to_frame, frame_to_exams
from ...models import (
    AttributeSchema,
    BiopsyOutcome,
    ExamHistory,
    ExamLabel,
    ExamRecord,
    ImageScoreRecord,
    Laterality,
    PopulationRow,
    SchemaViolation,
    ValidationReport,
)
from ..base import BaseModule

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

IMAGE_COLUMNS = ["image_id", "exam_id", "laterality", "view", "score"]
EXAM_COLUMNS = ["exam_id", "patient_id", "score", "label"]
METADATA_COLUMNS = ["exam_id", "patient_id", "label"]

# 12 and 24 months as fixed day counts; both boundaries inclusive.
CANCER_WINDOW = timedelta(days=365)
FOLLOWUP_WINDOW = timedelta(days=730)

LABEL_ALIASES = {
    "cancer": ExamLabel.CANCER,
    "non_cancer": ExamLabel.NON_CANCER,
    "noncancer": ExamLabel.NON_CANCER,
    "unknown": ExamLabel.UNKNOWN,
}


def read_csv_rows(
    path: PathLike, required: List[str], exact_prefix: bool = False
) -> Tuple[List[str], List[Tuple[int, Dict[str, str]]]]:
    """
    Read a CSV strictly, keeping physical line numbers.

    Returns:
        (header, [(line, row dict), ...]); blank lines are skipped
    """
    path = Path(path)
    if not path.exists():
        raise InputValidationError("file not found", path=path)
    rows: List[Tuple[int, Dict[str, str]]] = []
    try:
        with open(path, "r", encoding="utf-8-sig", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise InputValidationError("file is empty (no header)", path=path)
            header = [c.strip() for c in header]
            if exact_prefix:
                if header[: len(required)] != required:
                    raise InputValidationError(
                        f"header must start with {','.join(required)}, got {','.join(header)}", path=path, line=1
                    )
            else:
                missing = [c for c in required if c not in header]
                if missing:
                    raise InputValidationError(f"header lacks columns {missing}", path=path, line=1)
            for row in reader:
                line = reader.line_num
                if not row or all(not cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    column = header[len(row)] if len(row) < len(header) else f"#{len(row)}"
                    raise InputValidationError(
                        f"expected {len(header)} fields, found {len(row)}", path=path, line=line, column=column
                    )
                rows.append((line, dict(zip(header, row))))
    except UnicodeDecodeError as e:
        raise InputValidationError(f"not valid UTF-8: {e}", path=path)
    except csv.Error as e:
        raise InputValidationError(f"malformed CSV: {e}", path=path)
    return header, rows


def _parse_score(raw: str, path: Path, line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise InputValidationError(f"score {raw!r} is not a number", path=path, line=line, column="score")
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise InputValidationError(
            f"score {raw} outside [0, 1]", path=path, line=line, column="score"
        )
    return value


def _parse_label(raw: str, path: Path, line: int) -> ExamLabel:
    key = raw.strip().lower().replace("-", "_")
    if key not in LABEL_ALIASES:
        raise InputValidationError(
            f"label {raw!r} not in {{cancer, non_cancer, unknown}}", path=path, line=line, column="label"
        )
    return LABEL_ALIASES[key]


def _require_text(raw: str, column: str, path: Path, line: int) -> str:
    value = raw.strip()
    if not value:
        raise InputValidationError("empty value", path=path, line=line, column=column)
    return value


def parse_image_scores(path: PathLike) -> List[ImageScoreRecord]:
    """
    Parse an image-score CSV (image_id,exam_id,laterality,view,score).

    Args:
        path: CSV file

    Returns:
        One record per data row, in file order
    """
    path = Path(path)
    _, rows = read_csv_rows(path, IMAGE_COLUMNS)
    records: List[ImageScoreRecord] = []
    seen: Dict[str, int] = {}
    for line, values in rows:
        image_id = _require_text(values["image_id"], "image_id", path, line)
        if image_id in seen:
            raise InputValidationError(
                f"duplicate image_id {image_id!r} (first seen on line {seen[image_id]})",
                path=path, line=line, column="image_id",
            )
        seen[image_id] = line
        try:
            laterality = Laterality.parse(values["laterality"])
        except ValueError as e:
            raise InputValidationError(str(e), path=path, line=line, column="laterality")
        records.append(
            ImageScoreRecord(
                image_id=image_id,
                exam_id=_require_text(values["exam_id"], "exam_id", path, line),
                laterality=laterality,
                view=values["view"].strip(),
                score=_parse_score(values["score"], path, line),
            )
        )
    logger.info("Parsed %d image scores from %s", len(records), path)
    return records


def _parse_exam_rows(
    path: Path, header: List[str], rows: List[Tuple[int, Dict[str, str]]], with_score: bool
) -> List[ExamRecord]:
    fixed = EXAM_COLUMNS if with_score else METADATA_COLUMNS
    attributes = [c for c in header if c not in fixed]
    exams: List[ExamRecord] = []
    seen = set()
    for line, values in rows:
        exam_id = _require_text(values["exam_id"], "exam_id", path, line)
        if exam_id in seen:
            raise InputValidationError(f"duplicate exam_id {exam_id!r}", path=path, line=line, column="exam_id")
        seen.add(exam_id)
        exams.append(
            ExamRecord(
                exam_id=exam_id,
                patient_id=values["patient_id"].strip(),
                score=_parse_score(values["score"], path, line) if with_score else 0.0,
                label=_parse_label(values["label"], path, line),
                attributes={a: values[a].strip() for a in attributes},
            )
        )
    return exams


def parse_exam_scores(path: PathLike, schema: Optional[AttributeSchema] = None) -> List[ExamRecord]:
    """
    Parse an exam CSV (exam_id,patient_id,score,label,<attributes...>).

    Args:
        path: CSV file
        schema: When given, exams are validated against it

    Raises:
        SchemaViolationError: if the exams do not conform to the schema
    """
    path = Path(path)
    header, rows = read_csv_rows(path, EXAM_COLUMNS, exact_prefix=True)
    exams = _parse_exam_rows(path, header, rows, with_score=True)
    if schema is not None:
        _raise_on_violations(validate_against_schema(exams, schema), path)
    logger.info("Parsed %d exams from %s", len(exams), path)
    return exams


def parse_exam_metadata(path: PathLike, schema: Optional[AttributeSchema] = None) -> Dict[str, ExamRecord]:
    """
    Parse exam metadata (exam_id,patient_id,label,<attributes...>) keyed by
    exam_id, for joining with aggregated image scores.
    """
    path = Path(path)
    header, rows = read_csv_rows(path, METADATA_COLUMNS, exact_prefix=True)
    exams = _parse_exam_rows(path, header, rows, with_score=False)
    if schema is not None:
        _raise_on_violations(validate_against_schema(exams, schema), path)
    return OrderedDict((e.exam_id, e) for e in exams)


def parse_schema(path: PathLike) -> AttributeSchema:
    path = Path(path)
    if not path.exists():
        raise InputValidationError("schema file not found", path=path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputValidationError(f"invalid JSON: {e.msg}", path=path, line=e.lineno)
    try:
        return AttributeSchema.model_validate(data)
    except ValidationError as e:
        raise InputValidationError(f"invalid schema: {e}", path=path)


def parse_histories(path: PathLike) -> List[Tuple[str, ExamHistory, int]]:
    """
    Parse a history JSONL file.

    Each line holds exam_id, exam_date, exam_birads, biopsies:[{date, outcome}]
    and followups:[{date, birads}].

    Returns:
        (exam_id, history, exam_birads) per line, in file order
    """
    path = Path(path)
    if not path.exists():
        raise InputValidationError("history file not found", path=path)
    histories = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as e:
                raise InputValidationError(f"invalid JSON: {e.msg}", path=path, line=line_no)
            if not isinstance(data, dict) or "exam_id" not in data:
                raise InputValidationError("expected an object with exam_id", path=path, line=line_no)
            try:
                exam_birads = int(data.get("exam_birads", 0))
                if not 0 <= exam_birads <= 6:
                    raise ValueError(f"exam_birads must be in 0..6, got {exam_birads}")
                history = ExamHistory(
                    exam_date=data["exam_date"],
                    biopsy_events=[
                        {"date": b["date"], "outcome": _normalize_outcome(b["outcome"])}
                        for b in data.get("biopsies", [])
                    ],
                    followup_assessments=data.get("followups", []),
                )
            except (KeyError, ValueError, TypeError) as e:
                raise InputValidationError(f"invalid history record: {e}", path=path, line=line_no)
            histories.append((str(data["exam_id"]), history, exam_birads))
    logger.info("Parsed %d exam histories from %s", len(histories), path)
    return histories


def _normalize_outcome(raw: str) -> str:
    key = str(raw).strip().lower().replace("-", "_").replace(" ", "_")
    if key in ("malignant", "cancer"):
        return BiopsyOutcome.MALIGNANT.value
    if key in ("benign", "high_risk", "benign_or_high_risk", "benignorhighrisk"):
        return BiopsyOutcome.BENIGN_OR_HIGH_RISK.value
    raise ValueError(f"biopsy outcome {raw!r} is not malignant/benign/high_risk")


def aggregate_exam_score(images: Sequence[ImageScoreRecord]) -> float:
    """
    Exam score: mean image score per breast, then the maximum over breasts.

    Raises:
        InputValidationError: if there are no images
    """
    if not images:
        raise InputValidationError("no images for exam")
    by_side: Dict[Laterality, List[float]] = {}
    for image in images:
        by_side.setdefault(image.laterality, []).append(image.score)
    return max(math.fsum(scores) / len(scores) for scores in by_side.values())


def aggregate_exams(
    images: Sequence[ImageScoreRecord], metadata: Dict[str, ExamRecord]
) -> List[ExamRecord]:
    """
    Group images by exam (first-appearance order) and join exam metadata.

    Raises:
        InputValidationError: if an image's exam has no metadata row
    """
    grouped: Dict[str, List[ImageScoreRecord]] = OrderedDict()
    for image in images:
        grouped.setdefault(image.exam_id, []).append(image)
    exams = []
    for exam_id, exam_images in grouped.items():
        if exam_id not in metadata:
            raise InputValidationError(f"exam {exam_id!r} has images but no metadata row", column="exam_id")
        meta = metadata[exam_id]
        exams.append(meta.model_copy(update={"score": aggregate_exam_score(exam_images)}))
    missing = len(metadata) - len(exams)
    if missing:
        logger.warning("%d exams in the metadata have no images and were skipped", missing)
    return exams


def image_level_records(
    images: Sequence[ImageScoreRecord], metadata: Dict[str, ExamRecord], view_attribute: Optional[str] = "view"
) -> List[ExamRecord]:
    """
    One exam-like record per image, inheriting label and attributes from its
    exam. The image's view is exposed as an attribute when view_attribute is set.
    """
    records = []
    for image in images:
        if image.exam_id not in metadata:
            raise InputValidationError(f"exam {image.exam_id!r} has images but no metadata row", column="exam_id")
        meta = metadata[image.exam_id]
        attributes = dict(meta.attributes)
        if view_attribute:
            attributes[view_attribute] = image.view
        records.append(
            ExamRecord(
                exam_id=image.image_id,
                patient_id=meta.patient_id,
                score=image.score,
                label=meta.label,
                attributes=attributes,
            )
        )
    return records


def label_exam(history: ExamHistory, exam_birads: int) -> ExamLabel:
    """
    Ground-truth label of a screening exam.

    Cancer: a malignant biopsy within 365 days of the exam, or the exam
    itself is BI-RADS 6. NonCancer: no biopsy later than 365 days and
    follow-up reaching 730 days whose assessments up to that point are all
    BI-RADS <= 3. Everything else is Unknown.
    """
    start = history.exam_date
    biopsies = [b for b in history.biopsy_events if b.date >= start]
    followups = sorted((f for f in history.followup_assessments if f.date >= start), key=lambda f: f.date)

    if exam_birads == 6:
        return ExamLabel.CANCER
    if any(b.outcome == BiopsyOutcome.MALIGNANT and b.date - start <= CANCER_WINDOW for b in biopsies):
        return ExamLabel.CANCER

    if any(b.date - start > CANCER_WINDOW for b in biopsies):
        return ExamLabel.UNKNOWN
    for followup in followups:
        if followup.birads > 3:
            return ExamLabel.UNKNOWN
        if followup.date - start >= FOLLOWUP_WINDOW:
            return ExamLabel.NON_CANCER
    return ExamLabel.UNKNOWN


def validate_against_schema(exams: ExamsLike, schema: AttributeSchema) -> ValidationReport:
    """
    Check every exam carries exactly the declared attributes with declared values.

    Returns:
        Report listing every violation; valid iff empty
    """
    records = frame_to_exams(exams) if isinstance(exams, pd.DataFrame) else list(exams)
    declared = {spec.name: set(spec.values) for spec in schema.attributes}
    violations: List[SchemaViolation] = []
    for exam in records:
        for name, values in declared.items():
            if name not in exam.attributes:
                violations.append(SchemaViolation(exam_id=exam.exam_id, attribute=name, problem="missing attribute"))
            elif exam.attributes[name] not in values:
                violations.append(
                    SchemaViolation(
                        exam_id=exam.exam_id, attribute=name, problem="undeclared value", value=exam.attributes[name]
                    )
                )
        for name in exam.attributes:
            if name not in declared:
                violations.append(
                    SchemaViolation(exam_id=exam.exam_id, attribute=name, problem="undeclared attribute")
                )
    return ValidationReport(violations=violations)


def _raise_on_violations(report: ValidationReport, path: Optional[Path] = None) -> None:
    if report.valid:
        return
    first = report.violations[0]
    detail = f"exam {first.exam_id!r}: {first.problem} {first.attribute!r}"
    if first.value is not None:
        detail += f" = {first.value!r}"
    raise SchemaViolationError(
        f"{len(report.violations)} schema violation(s); first: {detail}", violations=report.violations, path=path
    )


def population_summary(exams: ExamsLike, schema: AttributeSchema) -> List[PopulationRow]:
    """Exam, label and unique-patient counts per attribute value."""
    frame = as_frame(exams)
    rows = []
    for spec in schema.attributes:
        if spec.name not in attribute_columns(frame):
            continue
        for value in spec.values:
            subset = frame[frame[spec.name] == value]
            unknown = int((subset["label"] == ExamLabel.UNKNOWN.value).sum())
            rows.append(
                PopulationRow(
                    attribute=spec.name,
                    value=value,
                    exams=len(subset),
                    labeled_exams=len(subset) - unknown,
                    unknown_exams=unknown,
                    cancers=int((subset["label"] == ExamLabel.CANCER.value).sum()),
                    patients=int(subset["patient_id"].nunique()),
                )
            )
    return rows


def write_exam_scores(exams: ExamsLike, path: PathLike) -> None:
    """Write exams in the standard exam CSV layout."""
    frame = as_frame(exams)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g")


class IngestionModule(BaseModule):
    """
    Ingestion module: file parsing, exam aggregation and labeling.
    """

    def operations(self) -> List[str]:
        return [
            "parse_image_scores",
            "parse_exam_scores",
            "parse_exam_metadata",
            "parse_histories",
            "parse_schema",
            "aggregate_exam_score",
            "aggregate_exams",
            "image_level_records",
            "label_exam",
            "validate_against_schema",
            "population_summary",
        ]

    def get_description(self) -> str:
        return "Parse score/metadata/history files, aggregate image scores to exams and assign labels"

    def load_exams(self, path: PathLike, schema: Optional[AttributeSchema] = None) -> pd.DataFrame:
        """Parse an exam CSV straight into the exam frame used by audits."""
        return exams_to_frame(parse_exam_scores(path, schema))

    def label_histories(self, path: PathLike) -> List[Tuple[str, ExamLabel]]:
        labels = [(exam_id, label_exam(history, birads)) for exam_id, history, birads in parse_histories(path)]
        counts = {label: sum(1 for _, assigned in labels if assigned == label) for label in ExamLabel}
        logger.info(
            "Labeled %d exams: %d cancer, %d non-cancer, %d unknown",
            len(labels), counts[ExamLabel.CANCER], counts[ExamLabel.NON_CANCER], counts[ExamLabel.UNKNOWN],
        )
        return labels
