"""
Attribute probe: L2-regularized logistic regression on model feature vectors.

A high probe AUC means the representation still encodes the attribute.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy import special

from ...config import BootstrapSettings, ProbeSettings
from ...exceptions import InputValidationError, UndefinedMetricError
from ...models import AucEstimate, ExamLabel, FeatureVectorRecord, ProbeModel, ProbeReport
from ...streams import stream
from ..base import BaseModule
from ..ingestion import read_csv_rows
from ..metrics import auc, bootstrap_with_settings, frame_auc

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCALE_FLOOR = 1e-8
GRADIENT_TOLERANCE = 1e-8
ARMIJO = 0.5
SHRINK = 0.5
MAX_SHRINKS = 60


def _record(path: Path, line: int, ident: str, label: str, vector: Sequence, dimension: Optional[int]) -> FeatureVectorRecord:
    try:
        record = FeatureVectorRecord(id=ident, vector=[float(x) for x in vector], attribute_label=int(label))
    except (ValueError, TypeError, ValidationError) as e:
        raise InputValidationError(f"invalid feature record: {e}", path=path, line=line)
    if dimension is not None and len(record.vector) != dimension:
        raise InputValidationError(
            f"vector has dimension {len(record.vector)}, expected {dimension}", path=path, line=line
        )
    return record


def read_feature_vectors(path: PathLike) -> List[FeatureVectorRecord]:
    """
    Read feature vectors from CSV (id,attribute_label,f0,...) or JSONL.

    The dimension of the first record is enforced on every later one.
    """
    path = Path(path)
    records: List[FeatureVectorRecord] = []
    dimension: Optional[int] = None
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        if not path.exists():
            raise InputValidationError("feature file not found", path=path)
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    data = json.loads(raw)
                except json.JSONDecodeError as e:
                    raise InputValidationError(f"invalid JSON: {e.msg}", path=path, line=line_no)
                if not isinstance(data, dict) or not {"id", "attribute_label", "vector"} <= data.keys():
                    raise InputValidationError("expected an object with id, attribute_label and vector", path=path, line=line_no)
                record = _record(path, line_no, str(data["id"]), data["attribute_label"], data["vector"], dimension)
                dimension = len(record.vector)
                records.append(record)
    else:
        header, rows = read_csv_rows(path, ["id", "attribute_label"], exact_prefix=True)
        features = header[2:]
        if not features:
            raise InputValidationError("no feature columns after id,attribute_label", path=path, line=1)
        for line, row in rows:
            record = _record(path, line, row["id"], row["attribute_label"], [row[f] for f in features], len(features))
            records.append(record)
    if not records:
        raise InputValidationError("no feature vectors", path=path)
    logger.info("Read %d feature vectors of dimension %d from %s", len(records), len(records[0].vector), path)
    return records


def _design(records: Sequence[FeatureVectorRecord]) -> Tuple[np.ndarray, np.ndarray]:
    if not records:
        raise InputValidationError("no feature vectors")
    dimension = len(records[0].vector)
    for record in records:
        if len(record.vector) != dimension:
            raise InputValidationError(
                f"record {record.id!r} has dimension {len(record.vector)}, expected {dimension}"
            )
    x = np.array([r.vector for r in records], dtype=float)
    y = np.array([r.attribute_label for r in records], dtype=float)
    return x, y


def _loss(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float) -> float:
    z = x @ w + b
    # log(1 + exp(-z)) for y=1 and log(1 + exp(z)) for y=0
    losses = np.logaddexp(0.0, np.where(y == 1.0, -z, z))
    return float((losses.sum() + 0.5 * l2 * (w @ w)) / y.size)


def _gradient(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float) -> Tuple[np.ndarray, float]:
    residual = special.expit(x @ w + b) - y
    return (x.T @ residual + l2 * w) / y.size, float(residual.mean())


def train_probe(
    train: Sequence[FeatureVectorRecord],
    l2: float = 1.0,
    iterations: int = 500,
    seed: int = 0,
    init_scale: float = 0.0,
) -> ProbeModel:
    """
    Fit the probe by full-batch gradient descent with backtracking.

    Features are standardized with the training mean and standard deviation
    (floored at 1e-8). The objective is the mean logistic loss plus
    l2/(2n) * |w|^2 with an unpenalized intercept. Each iteration starts the
    line search at step 1 and halves it until the Armijo condition holds, so
    the loss never increases. Training stops early once the gradient norm
    drops below 1e-8.

    Args:
        train: Training records with binary attribute labels
        l2: L2 penalty strength
        iterations: Maximum gradient steps
        seed: Seeds the initial weights when init_scale > 0
        init_scale: Std of the random initial weights; 0 starts from zeros

    Raises:
        InputValidationError: single-class input, dimension mismatch or bad settings
    """
    if l2 < 0:
        raise InputValidationError(f"l2 penalty must be non-negative, got {l2}")
    if iterations < 1:
        raise InputValidationError(f"iterations must be >= 1, got {iterations}")
    x, y = _design(train)
    if y.min() == y.max():
        raise InputValidationError(f"probe training needs both attribute labels, got only {int(y[0])}")
    mean = x.mean(axis=0)
    scale = np.maximum(x.std(axis=0), SCALE_FLOOR)
    xs = (x - mean) / scale

    w = stream(seed).normal(0.0, init_scale, xs.shape[1]) if init_scale > 0 else np.zeros(xs.shape[1])
    b = 0.0
    loss = _loss(xs, y, w, b, l2)
    trace = [loss]
    steps = 0
    for _ in range(iterations):
        gw, gb = _gradient(xs, y, w, b, l2)
        norm2 = float(gw @ gw + gb * gb)
        if np.sqrt(norm2) < GRADIENT_TOLERANCE:
            break
        t = 1.0
        for _ in range(MAX_SHRINKS):
            candidate_w, candidate_b = w - t * gw, b - t * gb
            candidate = _loss(xs, y, candidate_w, candidate_b, l2)
            if candidate <= loss - ARMIJO * t * norm2:
                break
            t *= SHRINK
        else:
            logger.debug("Line search exhausted at iteration %d", steps)
            break
        w, b, loss = candidate_w, candidate_b, candidate
        trace.append(loss)
        steps += 1
    logger.info("Probe trained: %d iterations, final loss %.6f", steps, loss)
    return ProbeModel(
        weights=w.tolist(),
        intercept=float(b),
        l2_penalty=l2,
        iterations_run=steps,
        feature_mean=mean.tolist(),
        feature_scale=scale.tolist(),
        loss_trace=trace,
    )


def probe_scores(model: ProbeModel, records: Sequence[FeatureVectorRecord]) -> np.ndarray:
    """Logistic of the affine map on standardized features."""
    x, _ = _design(records)
    if x.shape[1] != model.dimension:
        raise InputValidationError(f"feature dimension {x.shape[1]} does not match probe dimension {model.dimension}")
    xs = (x - np.asarray(model.feature_mean)) / np.asarray(model.feature_scale)
    return special.expit(xs @ np.asarray(model.weights) + model.intercept)


def eval_probe(model: ProbeModel, test: Sequence[FeatureVectorRecord]) -> float:
    """
    Probe AUC on held-out records.

    Raises:
        UndefinedMetricError: test set holds a single attribute label
    """
    scores = probe_scores(model, test)
    labels = np.array([r.attribute_label for r in test])
    return auc(scores[labels == 1], scores[labels == 0])


def _score_frame(model: ProbeModel, records: Sequence[FeatureVectorRecord]) -> pd.DataFrame:
    ids = [r.id for r in records]
    return pd.DataFrame(
        {
            "exam_id": ids,
            "patient_id": ids,
            "score": probe_scores(model, records),
            "label": [ExamLabel.CANCER.value if r.attribute_label == 1 else ExamLabel.NON_CANCER.value for r in records],
        }
    )


def probe_report(
    model: ProbeModel,
    test: Sequence[FeatureVectorRecord],
    settings: BootstrapSettings,
    n_train: int,
    progress: bool = False,
) -> ProbeReport:
    """Probe AUC with a bootstrap CI over test records."""
    n_pos = sum(1 for r in test if r.attribute_label == 1)
    n_neg = len(test) - n_pos
    if n_pos == 0 or n_neg == 0:
        estimate = AucEstimate(
            n_positive=n_pos, n_negative=n_neg, undefined_reason=f"{n_pos} positives and {n_neg} negatives"
        )
    else:
        ci = bootstrap_with_settings(_score_frame(model, test), settings, frame_auc, progress=progress)
        estimate = AucEstimate(ci=ci, n_positive=n_pos, n_negative=n_neg)
    return ProbeReport(
        auc=estimate,
        n_train=n_train,
        n_test=len(test),
        dimension=model.dimension,
        l2_penalty=model.l2_penalty,
        iterations_run=model.iterations_run,
        final_loss=model.loss_trace[-1] if model.loss_trace else float("nan"),
    )


class ProbeModule(BaseModule):
    """
    Probe module: logistic-regression attribute probe over feature vectors.
    """

    def operations(self) -> List[str]:
        return ["read_feature_vectors", "train_probe", "eval_probe", "probe_report"]

    def get_description(self) -> str:
        return "Logistic-regression probe measuring attribute information in feature vectors"

    def settings(self, **overrides) -> ProbeSettings:
        values = {k: v for k, v in self.config.items() if k in ProbeSettings.model_fields}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ProbeSettings(**values)

    def train(self, train: Sequence[FeatureVectorRecord], **overrides) -> ProbeModel:
        settings = self.settings(**overrides)
        return train_probe(train, settings.l2, settings.iterations, self.seed, settings.init_scale)

    def evaluate(self, model: ProbeModel, test: Sequence[FeatureVectorRecord]) -> Optional[float]:
        try:
            return eval_probe(model, test)
        except UndefinedMetricError as e:
            logger.warning("Probe AUC undefined: %s", e)
            return None
