"""
Shortcut mitigations as data artifacts.

Balanced sampling weights for an external trainer, attribute filters
(e.g. screening-only) and prevalence-matched evaluation sets.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ...exceptions import InputValidationError, SamplingError
from ...frames import ExamsLike, as_frame, is_positive, labeled, require_attribute
from ...models import AttributeSchema, ExamLabel, RunManifest, SamplingWeightTable, WeightCell, WeightRow, WeightsDocument
from ...streams import stream
from ..audit import attribute_values
from ..base import BaseModule

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

WEIGHT_SEMANTICS = (
    "Each weight is the probability of drawing that exam in one multinomial draw. "
    "Every (attribute value, label) cell carries total mass 1/(2V) for V attribute values, "
    "split evenly among the exams of the cell. Weights sum to 1."
)

LABELS = (ExamLabel.CANCER, ExamLabel.NON_CANCER)


def balanced_weights(exams: ExamsLike, attribute: str, schema: Optional[AttributeSchema] = None) -> SamplingWeightTable:
    """
    Weights giving every (value, label) cell the same total mass.

    Unknown-labeled exams receive no weight.

    Raises:
        InputValidationError: some (value, label) cell is empty
    """
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    frame = labeled(frame)
    positive = is_positive(frame)
    mass = 1.0 / (2 * len(values))
    cells: List[WeightCell] = []
    weight_of = {}
    for value in values:
        in_value = (frame[attribute] == value).to_numpy()
        for label, mask in zip(LABELS, (positive, ~positive)):
            count = int((in_value & mask).sum())
            if count == 0:
                raise InputValidationError(
                    f"cannot balance {attribute!r}: cell ({value}, {label.value}) has no exams", column=attribute
                )
            per_record = mass / count
            cells.append(WeightCell(value=value, label=label, count=count, mass=mass, per_record_weight=per_record))
            weight_of[(value, label.value)] = per_record
    rows = [
        WeightRow(exam_id=str(exam_id), weight=weight_of[(value, label)])
        for exam_id, value, label in zip(frame["exam_id"], frame[attribute], frame["label"])
        if (value, label) in weight_of
    ]
    logger.info("Balanced %d exams over %d cells of %r", len(rows), len(cells), attribute)
    return SamplingWeightTable(attribute=attribute, rows=rows, cells=cells)


def expected_cell_draws(table: SamplingWeightTable, n_draws: int) -> pd.DataFrame:
    """Expected multinomial count per cell over n_draws weighted draws."""
    return pd.DataFrame.from_records(
        [
            {"value": c.value, "label": c.label.value, "count": c.count, "mass": c.mass, "expected_draws": c.mass * n_draws}
            for c in table.cells
        ]
    )


def write_weight_table(
    table: SamplingWeightTable, path: PathLike, manifest: RunManifest, reference_draws: int = 10000
) -> Path:
    """
    Write the exam_id,weight CSV and its JSON sidecar.

    Returns:
        Path of the sidecar (same name, .json suffix)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"exam_id": [r.exam_id for r in table.rows], "weight": [r.weight for r in table.rows]})
    frame.to_csv(path, index=False, float_format="%.17g")
    sidecar = path.with_suffix(".json")
    document = WeightsDocument(
        manifest=manifest,
        attribute=table.attribute,
        semantics=WEIGHT_SEMANTICS,
        cells=table.cells,
        reference_draws=reference_draws,
        expected_draws=json.loads(expected_cell_draws(table, reference_draws).to_json(orient="records")),
    )
    sidecar.write_text(json.dumps(document.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return sidecar


@dataclass
class FilterResult:
    exams: pd.DataFrame
    kept: int
    removed: int


def filter_by_attribute(exams: ExamsLike, attribute: str, keep_value: str) -> FilterResult:
    """Keep exams whose attribute equals keep_value."""
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    mask = frame[attribute] == keep_value
    kept = frame[mask]
    if kept.empty:
        logger.warning("No exams with %s=%r; all %d removed", attribute, keep_value, len(frame))
    else:
        logger.info("Kept %d exams with %s=%r, removed %d", len(kept), attribute, keep_value, len(frame) - len(kept))
    return FilterResult(exams=kept, kept=len(kept), removed=len(frame) - len(kept))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def feasible_range(n_pos: int, n_neg: int) -> Tuple[float, float]:
    """Prevalences reachable by downsampling while keeping one exam per class."""
    return 1.0 / (n_neg + 1), n_pos / (n_pos + 1)


def _matched_counts(n_pos: int, n_neg: int, target: float) -> Tuple[int, int]:
    if n_pos / (n_pos + n_neg) > target:
        return min(n_pos, max(1, _round_half_up(target * n_neg / (1.0 - target)))), n_neg
    return n_pos, min(n_neg, max(1, _round_half_up(n_pos * (1.0 - target) / target)))


def prevalence_matched_eval(
    exams: ExamsLike,
    attribute: str,
    target_prevalence: float,
    seed: int = 0,
    schema: Optional[AttributeSchema] = None,
) -> pd.DataFrame:
    """
    Downsample each attribute value to the target prevalence.

    Each value first drops part of its majority class to reach the target.
    All values are then shrunk by the common factor
    min(matched size / original size) so their original size ratios hold,
    with pos = round(target * size). Value i draws without replacement from
    stream (seed, i). Unknown-labeled exams are dropped; the output keeps
    input order.

    Raises:
        InputValidationError: target outside the open interval (0, 1)
        SamplingError: target unreachable for some value, or the common
            shrink would leave some value without one of its classes
    """
    if not 0.0 < target_prevalence < 1.0:
        raise InputValidationError(f"target prevalence must lie strictly inside (0, 1), got {target_prevalence}")
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    frame = labeled(frame)
    positive = is_positive(frame)

    pools = []
    for value in values:
        in_value = (frame[attribute] == value).to_numpy()
        pos_idx, neg_idx = np.flatnonzero(in_value & positive), np.flatnonzero(in_value & ~positive)
        if pos_idx.size + neg_idx.size == 0:
            continue
        lo, hi = feasible_range(pos_idx.size, neg_idx.size)
        if not lo <= target_prevalence <= hi:
            raise SamplingError(
                f"{attribute}={value}: target prevalence {target_prevalence} unreachable by downsampling "
                f"{pos_idx.size} cancers and {neg_idx.size} non-cancers; feasible range [{lo:.6g}, {hi:.6g}]"
            )
        pools.append((value, pos_idx, neg_idx))
    if not pools:
        raise InputValidationError(f"no labeled exams carry a value of {attribute!r}", column=attribute)

    ratios = [sum(_matched_counts(p.size, n.size, target_prevalence)) / (p.size + n.size) for _, p, n in pools]
    shrink = min(ratios)
    limiting = pools[ratios.index(shrink)][0]
    keep = []
    for value, pos_idx, neg_idx in pools:
        size = _round_half_up(shrink * (pos_idx.size + neg_idx.size))
        k_pos = min(pos_idx.size, _round_half_up(target_prevalence * size))
        k_neg = min(neg_idx.size, size - k_pos)
        if k_pos < 1 or k_neg < 1:
            raise SamplingError(
                f"{attribute}={value}: scaling to the common size ratio {shrink:.4g} set by "
                f"{attribute}={limiting} leaves {k_pos} cancers and {k_neg} non-cancers; "
                "every value needs at least one exam of each class"
            )
        rng = stream(seed, values.index(value))
        keep.append(rng.choice(pos_idx, size=k_pos, replace=False))
        keep.append(rng.choice(neg_idx, size=k_neg, replace=False))
        logger.info(
            "%s=%s: kept %d/%d cancers and %d/%d non-cancers (prevalence %.4f)",
            attribute, value, k_pos, pos_idx.size, k_neg, neg_idx.size, k_pos / max(k_pos + k_neg, 1),
        )
    return frame.iloc[np.sort(np.concatenate(keep))]


class MitigationModule(BaseModule):
    """
    Mitigation module: balanced weights, attribute filters, prevalence matching.
    """

    def operations(self) -> List[str]:
        return ["balanced_weights", "expected_cell_draws", "filter_by_attribute", "prevalence_matched_eval"]

    def get_description(self) -> str:
        return "Balanced sampling weights, attribute filters and prevalence-matched evaluation sets"

    def prevalence_matched_eval(
        self, exams: ExamsLike, attribute: str, target_prevalence: float,
        schema: Optional[AttributeSchema] = None, seed: Optional[int] = None,
    ) -> pd.DataFrame:
        return prevalence_matched_eval(exams, attribute, target_prevalence, self.seed if seed is None else seed, schema)
