"""
Tabular view of exam records.

Audits, bootstraps and mitigations work on a pandas DataFrame with the
columns exam_id, patient_id, score, label and one string column per
attribute. Lists of ExamRecord convert to and from that frame.
"""

import logging
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .exceptions import InputValidationError
from .models import RESERVED_COLUMNS, ExamLabel, ExamRecord

logger = logging.getLogger(__name__)

ExamsLike = Union[pd.DataFrame, Sequence[ExamRecord]]


def exams_to_frame(exams: Sequence[ExamRecord]) -> pd.DataFrame:
    """Build the exam frame; attribute columns follow first-appearance order."""
    attribute_names: List[str] = []
    for exam in exams:
        for name in exam.attributes:
            if name not in attribute_names:
                attribute_names.append(name)
    data = {
        "exam_id": [e.exam_id for e in exams],
        "patient_id": [e.patient_id for e in exams],
        "score": np.array([e.score for e in exams], dtype=float),
        "label": [e.label.value for e in exams],
    }
    for name in attribute_names:
        data[name] = [e.attributes.get(name) for e in exams]
    return pd.DataFrame(data, columns=list(RESERVED_COLUMNS) + attribute_names)


def as_frame(exams: ExamsLike) -> pd.DataFrame:
    if isinstance(exams, pd.DataFrame):
        missing = [c for c in RESERVED_COLUMNS if c not in exams.columns]
        if missing:
            raise InputValidationError(f"exam table lacks columns {missing}")
        return exams
    return exams_to_frame(list(exams))


def attribute_columns(frame: pd.DataFrame) -> List[str]:
    return [c for c in frame.columns if c not in RESERVED_COLUMNS]


def frame_to_exams(frame: pd.DataFrame) -> List[ExamRecord]:
    names = attribute_columns(frame)
    exams = []
    for values in frame.to_dict(orient="records"):
        exams.append(
            ExamRecord(
                exam_id=str(values["exam_id"]),
                patient_id=str(values["patient_id"]),
                score=float(values["score"]),
                label=ExamLabel(values["label"]),
                attributes={n: str(values[n]) for n in names if values[n] is not None and not pd.isna(values[n])},
            )
        )
    return exams


def labeled(frame: pd.DataFrame) -> pd.DataFrame:
    """Drop Unknown-labeled exams; they never count as non-cancer."""
    mask = frame["label"] != ExamLabel.UNKNOWN.value
    dropped = int((~mask).sum())
    if dropped:
        logger.debug("Excluding %d unknown-labeled exams", dropped)
    return frame[mask]


def is_positive(frame: pd.DataFrame) -> np.ndarray:
    return (frame["label"] == ExamLabel.CANCER.value).to_numpy()


def class_scores(frame: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    """Positive and negative score arrays of a labeled frame."""
    frame = labeled(frame)
    scores = frame["score"].to_numpy(dtype=float)
    positive = is_positive(frame)
    return scores[positive], scores[~positive]


def require_attribute(frame: pd.DataFrame, attribute: str) -> None:
    if attribute not in attribute_columns(frame):
        raise InputValidationError(
            f"attribute {attribute!r} not present; available: {attribute_columns(frame)}", column=attribute
        )
