"""
Shortcut-detection battery.

Prevalence per attribute value, score distributions per value and class,
bias-aligned versus bias-conflicting AUC, stratified AUC with the paradox
flag, and composition sweeps that vary the attribute mix at fixed
per-value prevalence.
"""

import itertools
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ...config import BootstrapSettings, CompositionSettings
from ...exceptions import InputValidationError, UndefinedMetricError
from ...frames import ExamsLike, as_frame, is_positive, labeled, require_attribute
from ...models import (
    AttributeSchema,
    AuditReport,
    AucEstimate,
    BiasGapReport,
    CompositionCurve,
    CompositionPoint,
    DistributionComparison,
    ExamLabel,
    KsEntry,
    PrevalenceRow,
    PrevalenceTable,
    ScoreSummary,
    StratifiedAucReport,
    StratumAuc,
)
from ...streams import ordered_map, stream
from ..base import BaseModule
from ..metrics import bootstrap_with_settings, frame_auc, ks_statistic, quartiles

logger = logging.getLogger(__name__)

REST = "rest"


def attribute_values(frame: pd.DataFrame, attribute: str, schema: Optional[AttributeSchema] = None) -> List[str]:
    """Declared value order when the schema names the attribute, else sorted observed values."""
    spec = schema.get(attribute) if schema is not None else None
    if spec is not None:
        return list(spec.values)
    return sorted(str(v) for v in frame[attribute].dropna().unique())


def prevalence_table(exams: ExamsLike, attribute: str, schema: Optional[AttributeSchema] = None) -> PrevalenceTable:
    """
    Cancer prevalence per attribute value over labeled exams.

    Values without labeled exams are left out of the rows and listed in
    empty_values.
    """
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    frame = labeled(frame)
    rows, empty = [], []
    for value in values:
        subset = frame[frame[attribute] == value]
        total = len(subset)
        if total == 0:
            empty.append(value)
            continue
        positives = int(is_positive(subset).sum())
        rows.append(PrevalenceRow(value=value, prevalence=positives / total, positive_count=positives, total_count=total))
    if empty:
        logger.warning("Attribute %r: no labeled exams for %s", attribute, empty)
    return PrevalenceTable(attribute=attribute, rows=rows, empty_values=empty)


def distribution_comparison(
    exams: ExamsLike, attribute: str, schema: Optional[AttributeSchema] = None
) -> DistributionComparison:
    """Quartiles per (value, class) and pairwise KS across values within each class."""
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    frame = labeled(frame)
    positive = is_positive(frame)
    scores: Dict[Tuple[str, ExamLabel], np.ndarray] = {}
    summaries, absent = [], []
    for value in values:
        in_value = (frame[attribute] == value).to_numpy()
        for label, mask in ((ExamLabel.CANCER, positive), (ExamLabel.NON_CANCER, ~positive)):
            cell = frame["score"].to_numpy(dtype=float)[in_value & mask]
            if cell.size == 0:
                absent.append((value, label))
                continue
            scores[(value, label)] = cell
            q1, median, q3 = quartiles(cell)
            summaries.append(
                ScoreSummary(
                    value=value, label=label, count=int(cell.size),
                    mean=float(cell.mean()), q1=q1, median=median, q3=q3,
                )
            )
    ks = []
    for label in (ExamLabel.CANCER, ExamLabel.NON_CANCER):
        for a, b in itertools.combinations(values, 2):
            if (a, label) in scores and (b, label) in scores:
                ks.append(
                    KsEntry(label=label, value_a=a, value_b=b, statistic=ks_statistic(scores[(a, label)], scores[(b, label)]))
                )
    return DistributionComparison(attribute=attribute, summaries=summaries, ks=ks, absent_cells=absent)


def resolve_high_value(
    exams: ExamsLike,
    attribute: str,
    schema: Optional[AttributeSchema] = None,
    high_value: Optional[str] = None,
) -> Tuple[str, str]:
    """
    Pick the high-prevalence value of an attribute.

    Returns:
        (value, source) where source is "argument", "schema" or "empirical".
        The empirical choice is the value with the largest labeled prevalence;
        ties go to the earliest value in declared order.
    """
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    if high_value is not None:
        if high_value not in values:
            raise InputValidationError(f"high value {high_value!r} is not a value of {attribute!r}: {values}", column=attribute)
        return high_value, "argument"
    spec = schema.get(attribute) if schema is not None else None
    if spec is not None and spec.high_prevalence_value is not None:
        return spec.high_prevalence_value, "schema"
    table = prevalence_table(frame, attribute, schema)
    if not table.rows:
        raise InputValidationError(f"attribute {attribute!r} has no labeled exams", column=attribute)
    best = max(table.rows, key=lambda row: row.prevalence)
    return best.value, "empirical"


def bias_subsets(
    exams: ExamsLike, attribute: str, high_value: str, schema: Optional[AttributeSchema] = None
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Split labeled exams into bias-aligned and bias-conflicting subsets.

    Aligned holds cancers carrying high_value and non-cancers carrying any
    other value; conflicting holds the rest of the labeled exams.
    """
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    values = attribute_values(frame, attribute, schema)
    if high_value not in values:
        raise InputValidationError(f"high value {high_value!r} is not a value of {attribute!r}: {values}", column=attribute)
    frame = labeled(frame)
    positive = is_positive(frame)
    high = (frame[attribute] == high_value).to_numpy()
    aligned = (positive & high) | (~positive & ~high)
    return frame[aligned], frame[~aligned]


def estimate_auc(frame: pd.DataFrame, settings: BootstrapSettings, progress: bool = False) -> AucEstimate:
    """AUC with bootstrap CI, or an undefined marker when a class is missing."""
    frame = labeled(frame)
    n_pos = int(is_positive(frame).sum())
    n_neg = len(frame) - n_pos
    if n_pos == 0 or n_neg == 0:
        return AucEstimate(
            n_positive=n_pos, n_negative=n_neg,
            undefined_reason=f"{n_pos} positives and {n_neg} negatives",
        )
    ci = bootstrap_with_settings(frame, settings, frame_auc, progress=progress)
    return AucEstimate(ci=ci, n_positive=n_pos, n_negative=n_neg)


def bias_gap(
    exams: ExamsLike,
    attribute: str,
    high_value: str,
    settings: BootstrapSettings,
    schema: Optional[AttributeSchema] = None,
    high_value_source: str = "argument",
    progress: bool = False,
) -> BiasGapReport:
    """Aligned AUC minus conflicting AUC, each with its bootstrap CI."""
    aligned, conflicting = bias_subsets(exams, attribute, high_value, schema)
    aligned_auc = estimate_auc(aligned, settings, progress)
    conflicting_auc = estimate_auc(conflicting, settings, progress)
    gap = None
    if aligned_auc.defined and conflicting_auc.defined:
        gap = aligned_auc.point - conflicting_auc.point
    else:
        logger.warning("Bias gap for %r is undefined: a subset lacks a class", attribute)
    return BiasGapReport(
        attribute=attribute,
        high_value=high_value,
        high_value_source=high_value_source,
        aligned_auc=aligned_auc,
        conflicting_auc=conflicting_auc,
        gap=gap,
    )


def stratified_auc_report(
    exams: ExamsLike,
    attribute: str,
    settings: BootstrapSettings,
    schema: Optional[AttributeSchema] = None,
    group: Optional[Dict[str, str]] = None,
    progress: bool = False,
) -> StratifiedAucReport:
    """
    Per-stratum and combined AUC with the paradox flag.

    The flag is set when the combined point estimate exceeds every defined
    stratum point estimate; strata lacking a class are listed as undefined
    and ignored by the comparison.

    Raises:
        InputValidationError: fewer than two strata have labeled exams
        UndefinedMetricError: the combined AUC is undefined
    """
    frame = labeled(as_frame(exams))
    require_attribute(frame, attribute)
    values = [v for v in attribute_values(frame, attribute, schema) if (frame[attribute] == v).any()]
    if len(values) < 2:
        raise InputValidationError(
            f"stratified AUC needs at least 2 strata of {attribute!r}, found {values}", column=attribute
        )
    combined = estimate_auc(frame, settings, progress)
    if not combined.defined:
        raise UndefinedMetricError(f"combined AUC over {attribute!r} is undefined: {combined.undefined_reason}")
    strata, undefined = [], []
    for value in values:
        estimate = estimate_auc(frame[frame[attribute] == value], settings, progress)
        strata.append(StratumAuc(value=value, estimate=estimate))
        if not estimate.defined:
            undefined.append(value)
    defined_points = [s.estimate.point for s in strata if s.estimate.defined]
    paradox = bool(defined_points) and combined.point > max(defined_points)
    if paradox:
        logger.warning(
            "AUC paradox on %r%s: combined %.4f exceeds every stratum (max %.4f)",
            attribute, f" within {group}" if group else "", combined.point, max(defined_points),
        )
    return StratifiedAucReport(
        attribute=attribute, strata=strata, combined=combined,
        paradox_flag=paradox, undefined_strata=undefined, group=group,
    )


def _groups(frame: pd.DataFrame, within: str, schema: Optional[AttributeSchema]) -> List[Tuple[str, pd.DataFrame]]:
    require_attribute(frame, within)
    return [(v, frame[frame[within] == v]) for v in attribute_values(frame, within, schema) if (frame[within] == v).any()]


def stratified_auc_breakdown(
    exams: ExamsLike,
    attribute: str,
    within: str,
    settings: BootstrapSettings,
    schema: Optional[AttributeSchema] = None,
    progress: bool = False,
) -> List[StratifiedAucReport]:
    """Stratified AUC reports repeated inside each value of a second attribute."""
    frame = labeled(as_frame(exams))
    reports = []
    for value, subset in _groups(frame, within, schema):
        try:
            reports.append(
                stratified_auc_report(subset, attribute, settings, schema, group={within: value}, progress=progress)
            )
        except (InputValidationError, UndefinedMetricError) as e:
            logger.info("Skipping %s=%s: %s", within, value, e)
    return reports


def _draw_class_balanced(
    rng: np.random.Generator, pos_idx: np.ndarray, neg_idx: np.ndarray, k: int
) -> np.ndarray:
    total = pos_idx.size + neg_idx.size
    k_pos = int(math.floor(k * pos_idx.size / total + 0.5))
    k_neg = k - k_pos
    return np.concatenate([
        pos_idx[rng.integers(0, pos_idx.size, size=k_pos)] if k_pos else pos_idx[:0],
        neg_idx[rng.integers(0, neg_idx.size, size=k_neg)] if k_neg else neg_idx[:0],
    ])


def composition_sweep(
    exams: ExamsLike,
    attribute: str,
    value_b: str,
    value_a: Optional[str] = None,
    fractions: Sequence[float] = tuple(i / 10 for i in range(11)),
    subsets_per_point: int = 10,
    seed: int = 0,
    threads: int = 1,
    group: Optional[Dict[str, str]] = None,
    progress: bool = False,
) -> CompositionCurve:
    """
    Mean and std of AUC as the share of value_b exams grows from 0 to 1.

    The subset size N is the number of labeled exams in the input set;
    value_a None means every value other than value_b. A point at fraction f
    draws ceil(f*N) exams from value_b and the rest from value_a, with
    replacement, each side keeping its own cancer prevalence. Subset s of
    point i draws from stream (seed, i, s).
    """
    frame = labeled(as_frame(exams)).reset_index(drop=True)
    require_attribute(frame, attribute)
    if subsets_per_point < 1:
        raise InputValidationError(f"subsets_per_point must be >= 1, got {subsets_per_point}")
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise InputValidationError(f"composition fractions must lie in [0, 1], got {f}")
    in_b = (frame[attribute] == value_b).to_numpy()
    in_a = (frame[attribute].notna().to_numpy() & ~in_b) if value_a is None else (frame[attribute] == value_a).to_numpy()
    positive = is_positive(frame)
    pools = {
        "a": (np.flatnonzero(in_a & positive), np.flatnonzero(in_a & ~positive)),
        "b": (np.flatnonzero(in_b & positive), np.flatnonzero(in_b & ~positive)),
    }
    n = len(frame)
    if not (in_a.any() or in_b.any()):
        raise InputValidationError(f"no labeled exams carry {value_a or REST!r} or {value_b!r}", column=attribute)

    sizes = []
    for f in fractions:
        k_b = int(math.ceil(round(f * n, 9)))
        sizes.append((k_b, n - k_b))

    def empty_side(k_b: int, k_a: int) -> Optional[str]:
        for side, k in (("b", k_b), ("a", k_a)):
            pos_idx, neg_idx = pools[side]
            if k > 0 and pos_idx.size + neg_idx.size == 0:
                return f"no exams with {attribute}={value_b if side == 'b' else (value_a or REST)}"
        return None

    def run_subset(key: Tuple[int, int]) -> Optional[float]:
        i, s = key
        k_b, k_a = sizes[i]
        if empty_side(k_b, k_a):
            return None
        rng = stream(seed, i, s)
        parts = [_draw_class_balanced(rng, *pools[side], k) for side, k in (("b", k_b), ("a", k_a)) if k > 0]
        try:
            return frame_auc(frame.take(np.concatenate(parts)))
        except UndefinedMetricError:
            return None

    keys = [(i, s) for i in range(len(sizes)) for s in range(subsets_per_point)]
    values = ordered_map(run_subset, keys, threads=threads, progress=progress, desc="composition sweep")

    points = []
    for i, (f, (k_b, k_a)) in enumerate(zip(fractions, sizes)):
        aucs = [v for v in values[i * subsets_per_point:(i + 1) * subsets_per_point] if v is not None]
        if not aucs:
            reason = empty_side(k_b, k_a) or "every subset lacked a class"
            points.append(CompositionPoint(fraction=f, n_from_b=k_b, undefined_reason=reason))
            continue
        arr = np.asarray(aucs)
        points.append(
            CompositionPoint(
                fraction=f, n_from_b=k_b, mean_auc=float(arr.mean()),
                std_auc=float(arr.std(ddof=1)) if arr.size > 1 else 0.0, defined_subsets=int(arr.size),
            )
        )
    return CompositionCurve(
        attribute=attribute, value_a=value_a or REST, value_b=value_b, subset_size=n,
        subsets_per_point=subsets_per_point, points=points, group=group,
    )


def composition_breakdown(
    exams: ExamsLike,
    attribute: str,
    within: str,
    value_b: str,
    value_a: Optional[str] = None,
    schema: Optional[AttributeSchema] = None,
    **kwargs,
) -> List[CompositionCurve]:
    """Composition sweeps repeated inside each value of a second attribute."""
    frame = labeled(as_frame(exams))
    return [
        composition_sweep(subset, attribute, value_b, value_a, group={within: value}, **kwargs)
        for value, subset in _groups(frame, within, schema)
    ]


def run_battery(
    exams: ExamsLike,
    attribute: str,
    settings: BootstrapSettings,
    composition: Optional[CompositionSettings] = None,
    schema: Optional[AttributeSchema] = None,
    high_value: Optional[str] = None,
    within: Optional[str] = None,
    progress: bool = False,
) -> AuditReport:
    """
    Every audit for one attribute, assembled into an AuditReport.

    Sub-reports that cannot be computed on this data are left empty and
    explained in notes. With within set, the stratified AUC and the
    composition sweep are also repeated inside each value of that attribute.
    """
    frame = as_frame(exams)
    require_attribute(frame, attribute)
    composition = composition or CompositionSettings()
    notes = []
    unknown = int((frame["label"] == ExamLabel.UNKNOWN.value).sum())
    if unknown:
        notes.append(f"{unknown} unknown-labeled exams excluded")

    prevalence = prevalence_table(frame, attribute, schema)
    if prevalence.empty_values:
        notes.append(f"values without labeled exams: {', '.join(prevalence.empty_values)}")
    distribution = distribution_comparison(frame, attribute, schema)

    value, source = resolve_high_value(frame, attribute, schema, high_value)
    notes.append(f"high-prevalence value {value!r} ({source})")
    gap = bias_gap(frame, attribute, value, settings, schema, source, progress)

    stratified = None
    try:
        stratified = stratified_auc_report(frame, attribute, settings, schema, progress=progress)
        if stratified.undefined_strata:
            notes.append(f"strata lacking a class: {', '.join(stratified.undefined_strata)}")
    except (InputValidationError, UndefinedMetricError) as e:
        notes.append(f"stratified AUC skipped: {e}")

    present = [row.value for row in prevalence.rows]
    others = [v for v in present if v != value]
    value_a = others[0] if len(others) == 1 else None
    curve = composition_sweep(
        frame, attribute, value_b=value, value_a=value_a,
        fractions=composition.fractions, subsets_per_point=composition.subsets_per_point,
        seed=settings.seed, threads=settings.threads, progress=progress,
    )
    notes.append(f"composition subset size fixed to the {curve.subset_size} labeled exams of the input set")
    stratified_within, composition_within = [], []
    if within is not None and within != attribute:
        stratified_within = stratified_auc_breakdown(frame, attribute, within, settings, schema, progress)
        composition_within = composition_breakdown(
            frame, attribute, within, value_b=value, value_a=value_a, schema=schema,
            fractions=composition.fractions, subsets_per_point=composition.subsets_per_point,
            seed=settings.seed, threads=settings.threads, progress=progress,
        )
    return AuditReport(
        attribute=attribute, prevalence=prevalence, distribution=distribution,
        bias_gap=gap, stratified=stratified, composition=curve,
        stratified_within=stratified_within, composition_within=composition_within, notes=notes,
    )


def curve_to_frame(curve: CompositionCurve) -> pd.DataFrame:
    records = []
    for point in curve.points:
        record = dict(curve.group or {})
        record.update(
            attribute=curve.attribute, value_a=curve.value_a, value_b=curve.value_b,
            fraction=point.fraction, n_from_b=point.n_from_b, mean_auc=point.mean_auc,
            std_auc=point.std_auc, defined_subsets=point.defined_subsets,
        )
        records.append(record)
    return pd.DataFrame.from_records(records)


def distribution_to_frame(comparison: DistributionComparison) -> pd.DataFrame:
    return pd.DataFrame.from_records(
        [dict(attribute=comparison.attribute, **s.model_dump(mode="json")) for s in comparison.summaries]
    )


class AuditModule(BaseModule):
    """
    Audit module: shortcut-detection battery over exam-level scores.
    """

    def operations(self) -> List[str]:
        return [
            "prevalence_table",
            "distribution_comparison",
            "bias_subsets",
            "bias_gap",
            "stratified_auc_report",
            "composition_sweep",
            "run_battery",
        ]

    def get_description(self) -> str:
        return "Prevalence, distribution, bias-gap, stratified-AUC and composition audits per attribute"

    def composition_settings(self) -> CompositionSettings:
        return CompositionSettings(**self.config.get("composition", {}))

    def run_battery(
        self,
        exams: ExamsLike,
        attribute: str,
        schema: Optional[AttributeSchema] = None,
        high_value: Optional[str] = None,
        within: Optional[str] = None,
        progress: bool = False,
        **overrides,
    ) -> AuditReport:
        return run_battery(
            exams, attribute, self.bootstrap_settings(**overrides), self.composition_settings(),
            schema=schema, high_value=high_value, within=within, progress=progress,
        )

    def run_all(
        self,
        exams: ExamsLike,
        schema: AttributeSchema,
        within: Optional[str] = None,
        progress: bool = False,
        **overrides,
    ) -> List[AuditReport]:
        """The battery for every schema attribute, in declared order."""
        reports = []
        for name in schema.names:
            logger.info("Auditing attribute %r", name)
            reports.append(
                self.run_battery(exams, name, schema, within=within, progress=progress, **overrides)
            )
        return reports
