"""
Core statistics: AUC, percentile bootstrap CIs, the two-sample KS
statistic and quartile summaries.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from ...config import BootstrapSettings
from ...exceptions import InputValidationError, SamplingError, UndefinedMetricError
from ...frames import ExamsLike, as_frame, class_scores, is_positive, labeled
from ...models import ConfidenceInterval
from ...streams import chunked, ordered_map, stream
from ..base import BaseModule

logger = logging.getLogger(__name__)

ScoreSample = Union[Sequence[float], np.ndarray]
Statistic = Callable[[pd.DataFrame], float]


def _as_sample(values: ScoreSample, name: str) -> np.ndarray:
    sample = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(sample)):
        raise InputValidationError(f"{name} contains non-finite scores")
    return sample


def auc(pos: ScoreSample, neg: ScoreSample) -> float:
    """
    Probability that a random positive outscores a random negative.

    Ties count one half. Computed from average ranks (Mann-Whitney U), which
    equals the pairwise definition exactly.

    Args:
        pos: Positive-class scores
        neg: Negative-class scores

    Returns:
        AUC in [0, 1]

    Raises:
        UndefinedMetricError: if either sample is empty
    """
    pos = _as_sample(pos, "positive sample")
    neg = _as_sample(neg, "negative sample")
    n_pos, n_neg = pos.size, neg.size
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(f"undefined AUC: {n_pos} positives and {n_neg} negatives")
    ranks = stats.rankdata(np.concatenate([pos, neg]), method="average")
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_from_labels(scores: ScoreSample, labels: ScoreSample) -> float:
    """AUC of scores against binary labels (1 = positive)."""
    scores = _as_sample(scores, "scores")
    labels = np.asarray(labels).ravel().astype(int)
    if labels.shape != scores.shape:
        raise InputValidationError(f"{scores.size} scores but {labels.size} labels")
    return auc(scores[labels == 1], scores[labels == 0])


def frame_auc(frame: pd.DataFrame) -> float:
    """AUC of a labeled exam frame; Unknown labels are excluded."""
    pos, neg = class_scores(frame)
    return auc(pos, neg)


def ks_statistic(a: ScoreSample, b: ScoreSample) -> float:
    """
    Two-sample Kolmogorov-Smirnov statistic D = sup |ECDF_a - ECDF_b|.

    Raises:
        UndefinedMetricError: if either sample is empty
    """
    a = _as_sample(a, "first sample")
    b = _as_sample(b, "second sample")
    if a.size == 0 or b.size == 0:
        raise UndefinedMetricError(f"undefined KS statistic: sample sizes {a.size} and {b.size}")
    # p-value unused
    return float(stats.ks_2samp(a, b, method="asymp").statistic)


def quartiles(a: ScoreSample) -> Tuple[float, float, float]:
    """Linear-interpolation quartiles (position p*(n-1), zero-indexed)."""
    a = _as_sample(a, "sample")
    if a.size == 0:
        raise UndefinedMetricError("undefined quartiles: empty sample")
    q1, median, q3 = np.quantile(a, [0.25, 0.5, 0.75], method="linear")
    return float(q1), float(median), float(q3)


def standard_error_auc(value: float, n_pos: int, n_neg: int) -> float:
    """Hanley-McNeil standard error of an AUC estimate."""
    q1 = value / (2 - value)
    q2 = 2 * value * value / (1 + value)
    var = (value * (1 - value) + (n_pos - 1) * (q1 - value ** 2) + (n_neg - 1) * (q2 - value ** 2)) / (n_pos * n_neg)
    return math.sqrt(max(var, 0.0))


def _resample_indices(
    rng: np.random.Generator, n: int, positive: Optional[np.ndarray]
) -> np.ndarray:
    if positive is None:
        return rng.integers(0, n, size=n)
    pos_idx = np.flatnonzero(positive)
    neg_idx = np.flatnonzero(~positive)
    return np.concatenate([
        pos_idx[rng.integers(0, pos_idx.size, size=pos_idx.size)] if pos_idx.size else pos_idx,
        neg_idx[rng.integers(0, neg_idx.size, size=neg_idx.size)] if neg_idx.size else neg_idx,
    ])


def bootstrap_ci(
    exams: ExamsLike,
    statistic: Statistic = frame_auc,
    replicates: int = 10000,
    level: float = 0.95,
    seed: int = 0,
    stratified: bool = False,
    redraw_factor: int = 100,
    threads: int = 1,
    progress: bool = False,
) -> ConfidenceInterval:
    """
    Percentile bootstrap CI of a statistic over an exam set.

    Exams are resampled with replacement at the exam level, preserving the
    set size. Replicate r draws from the stream derived from (seed, r), so
    the result is identical for any thread count. Replicates on which the
    statistic is undefined are redrawn from the same stream and counted.

    Args:
        exams: Exam frame or records (Unknown labels are excluded)
        statistic: Function of an exam frame returning a float
        replicates: Number of bootstrap replicates
        level: Central coverage of the interval
        seed: Run seed
        stratified: Resample positives and negatives separately
        redraw_factor: At most redraw_factor * replicates degenerate draws
        threads: Worker threads
        progress: Show a progress bar

    Returns:
        ConfidenceInterval with the full-set point estimate
    """
    if replicates < 1:
        raise InputValidationError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < level < 1.0:
        raise InputValidationError(f"level must lie in (0, 1), got {level}")
    frame = labeled(as_frame(exams)).reset_index(drop=True)
    point = statistic(frame)
    n = len(frame)
    positive = is_positive(frame) if stratified else None
    max_discards = redraw_factor * replicates

    def run_chunk(indices: List[int]) -> List[Tuple[float, int]]:
        out = []
        for r in indices:
            rng = stream(seed, r)
            discarded = 0
            while True:
                sample = frame.take(_resample_indices(rng, n, positive))
                try:
                    value = statistic(sample)
                    break
                except UndefinedMetricError:
                    discarded += 1
                    if discarded > max_discards:
                        raise SamplingError(
                            f"bootstrap replicate {r} stayed degenerate after {discarded} redraws"
                        )
            out.append((value, discarded))
        return out

    chunk_size = max(1, min(256, replicates // max(threads, 1) or 1))
    chunks = chunked(range(replicates), chunk_size)
    per_chunk = ordered_map(run_chunk, chunks, threads=threads, progress=progress, desc="bootstrap")
    results = [pair for chunk in per_chunk for pair in chunk]
    values = np.array([v for v, _ in results], dtype=float)
    discarded = int(sum(d for _, d in results))
    if discarded > max_discards:
        raise SamplingError(f"{discarded} degenerate bootstrap draws exceed the cap of {max_discards}")
    if discarded:
        logger.info("Redrew %d degenerate bootstrap replicates", discarded)
    alpha = (1.0 - level) / 2.0
    lower, upper = np.quantile(values, [alpha, 1.0 - alpha], method="linear")
    return ConfidenceInterval(
        point=float(point),
        lower=float(lower),
        upper=float(upper),
        replicates=replicates,
        level=level,
        discarded_degenerate=discarded,
    )


def bootstrap_with_settings(
    exams: ExamsLike,
    settings: BootstrapSettings,
    statistic: Statistic = frame_auc,
    progress: bool = False,
) -> ConfidenceInterval:
    return bootstrap_ci(
        exams,
        statistic,
        replicates=settings.replicates,
        level=settings.level,
        seed=settings.seed,
        stratified=settings.stratified,
        redraw_factor=settings.redraw_factor,
        threads=settings.threads,
        progress=progress,
    )


class MetricsModule(BaseModule):
    """
    Metrics module: AUC, bootstrap CIs, KS statistic and quartiles.
    """

    def operations(self) -> List[str]:
        return ["auc", "bootstrap_ci", "ks_statistic", "quartiles"]

    def get_description(self) -> str:
        return "AUC, percentile bootstrap confidence intervals, KS statistic and quartile summaries"

    def auc(self, pos: ScoreSample, neg: ScoreSample) -> float:
        return auc(pos, neg)

    def ks_statistic(self, a: ScoreSample, b: ScoreSample) -> float:
        return ks_statistic(a, b)

    def quartiles(self, a: ScoreSample) -> Tuple[float, float, float]:
        return quartiles(a)

    def bootstrap_ci(
        self, exams: ExamsLike, statistic: Statistic = frame_auc, progress: bool = False, **overrides
    ) -> ConfidenceInterval:
        """Bootstrap CI using the configured replicates, level, seed and threads."""
        return bootstrap_with_settings(exams, self.bootstrap_settings(**overrides), statistic, progress)
