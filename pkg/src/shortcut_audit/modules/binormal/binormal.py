"""
Binormal AUC-paradox model: closed forms, Monte Carlo sampling, parameter
sweeps and zero-crossing extraction.

Set 0 scores: negatives ~ N(0, 1), positives ~ N(a, 1).
Set 1 scores: negatives ~ N(m, 1), positives ~ N(a + m, 1).
Both sets share the within-set AUC Phi(a / sqrt(2)); pooling them moves the
combined AUC away from it whenever m != 0 and the sets contribute positives
and negatives in different proportions.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import special

from ...exceptions import InputValidationError, SamplingError
from ...models import BinormalSpec, ExamLabel, SamplingMix, SweepCell, SweepGrid, ZeroCrossing
from ...streams import ordered_map, stream
from ..base import BaseModule
from ..metrics import auc

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def normal_cdf(x: ArrayLike) -> Union[float, np.ndarray]:
    """Standard normal CDF."""
    result = special.ndtr(x)
    return float(result) if np.ndim(result) == 0 else result


def normal_quantile(p: ArrayLike) -> Union[float, np.ndarray]:
    """
    Standard normal quantile (inverse CDF).

    Raises:
        InputValidationError: if any p is outside the open interval (0, 1)
    """
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise InputValidationError(f"normal quantile needs p strictly inside (0, 1), got {p}")
    result = special.ndtri(arr)
    return float(result) if np.ndim(result) == 0 else result


def separation_from_auc(target_auc: float) -> float:
    """Class separation a = sqrt(2) * Phi^-1(AUC) of the unit-variance binormal model."""
    if not 0.0 < target_auc < 1.0:
        raise InputValidationError(f"target AUC must lie in the open interval (0, 1), got {target_auc}")
    return SQRT2 * float(special.ndtri(target_auc))


def analytic_auc(mu0: float, sigma0: float, mu1: float, sigma1: float) -> float:
    """P(X1 > X0) for independent X0 ~ N(mu0, sigma0^2), X1 ~ N(mu1, sigma1^2)."""
    if sigma0 <= 0 or sigma1 <= 0:
        raise InputValidationError(f"standard deviations must be positive, got {sigma0}, {sigma1}")
    return float(special.ndtr((mu1 - mu0) / math.sqrt(sigma1 ** 2 + sigma0 ** 2)))


def delta_terms(target_auc: float, m: float) -> Tuple[float, float]:
    """
    The two brackets of the combined-minus-target difference.

    Returns:
        (aligned, conflicting): Phi((a+m)/sqrt2) - Phi(a/sqrt2) and
        Phi((a-m)/sqrt2) - Phi(a/sqrt2). For m >= 0 the first is >= 0 and
        the second <= 0.
    """
    a = separation_from_auc(target_auc)
    base = special.ndtr(a / SQRT2)
    return float(special.ndtr((a + m) / SQRT2) - base), float(special.ndtr((a - m) / SQRT2) - base)


def combined_auc_delta(target_auc: float, m: float, mix: SamplingMix) -> float:
    """Combined AUC minus target AUC for a given sampling mix."""
    aligned, conflicting = delta_terms(target_auc, m)
    return aligned * (1.0 - mix.p0) * mix.p1 + conflicting * mix.p0 * (1.0 - mix.p1)


def combined_auc_analytic(target_auc: float, m: float, mix: SamplingMix) -> float:
    return target_auc + combined_auc_delta(target_auc, m, mix)


@dataclass(frozen=True)
class BinormalSample:
    """Scores of one simulated two-set draw with each score's set (0 or 1)."""

    target_auc: float
    bias_m: float
    pos: np.ndarray
    neg: np.ndarray
    pos_set: np.ndarray
    neg_set: np.ndarray

    @property
    def realized_mix(self) -> SamplingMix:
        return SamplingMix(
            p0=float(self.neg_set.mean()) if self.neg_set.size else 0.0,
            p1=float(self.pos_set.mean()) if self.pos_set.size else 0.0,
        )

    def empirical_auc(self) -> float:
        return auc(self.pos, self.neg)

    def analytic_delta(self) -> float:
        """Closed-form delta evaluated at the realized mix."""
        return combined_auc_delta(self.target_auc, self.bias_m, self.realized_mix)

    def stratum_auc(self, set_index: int) -> float:
        return auc(self.pos[self.pos_set == set_index], self.neg[self.neg_set == set_index])


def class_counts(prevalence: float, size: int, label: str = "set") -> Tuple[int, int]:
    """
    Positive and negative counts for a set, rounding half up.

    Raises:
        SamplingError: if either class ends up empty
    """
    n_pos = int(math.floor(prevalence * size + 0.5))
    n_neg = size - n_pos
    if n_pos < 1 or n_neg < 1:
        raise SamplingError(
            f"{label}: prevalence {prevalence} of {size} cases gives {n_pos} positives and {n_neg} negatives"
        )
    return n_pos, n_neg


def _draw_sets(
    a: float, m: float, counts: Tuple[int, int, int, int], rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n_neg0, n_pos0, n_neg1, n_pos1 = counts
    neg0 = rng.normal(0.0, 1.0, n_neg0)
    pos0 = rng.normal(a, 1.0, n_pos0)
    neg1 = rng.normal(m, 1.0, n_neg1)
    pos1 = rng.normal(a + m, 1.0, n_pos1)
    pos = np.concatenate([pos0, pos1])
    neg = np.concatenate([neg0, neg1])
    pos_set = np.concatenate([np.zeros(n_pos0, dtype=np.int8), np.ones(n_pos1, dtype=np.int8)])
    neg_set = np.concatenate([np.zeros(n_neg0, dtype=np.int8), np.ones(n_neg1, dtype=np.int8)])
    return pos, neg, pos_set, neg_set


def _sample_sets(
    target_auc: float, m: float, prev0: float, prev1: float, n0: int, n1: int, rng: np.random.Generator
) -> BinormalSample:
    a = separation_from_auc(target_auc)
    n_pos0, n_neg0 = class_counts(prev0, n0, "set 0")
    n_pos1, n_neg1 = class_counts(prev1, n1, "set 1")
    pos, neg, pos_set, neg_set = _draw_sets(a, m, (n_neg0, n_pos0, n_neg1, n_pos1), rng)
    return BinormalSample(target_auc, m, pos, neg, pos_set, neg_set)


def sample_combined(spec: BinormalSpec) -> BinormalSample:
    """
    Draw both sets of a binormal spec.

    Per-set class counts are the prevalences times the set sizes, rounded to
    the nearest integer; the draw is deterministic given spec.seed.
    """
    return _sample_sets(
        spec.target_auc, spec.bias_m, spec.prevalence_set0, spec.prevalence_set1,
        spec.n_set0, spec.n_set1, stream(spec.seed),
    )


def sample_bernoulli_mix(
    target_auc: float, m: float, mix: SamplingMix, n_pos: int, n_neg: int, rng: np.random.Generator
) -> BinormalSample:
    """
    Draw n_pos positives and n_neg negatives, assigning each case to Set 1
    with probability p1 (positives) or p0 (negatives).
    """
    if n_pos < 1 or n_neg < 1:
        raise SamplingError(f"need at least one case per class, got {n_pos} positives and {n_neg} negatives")
    a = separation_from_auc(target_auc)
    pos_set = (rng.random(n_pos) < mix.p1).astype(np.int8)
    neg_set = (rng.random(n_neg) < mix.p0).astype(np.int8)
    pos = rng.normal(0.0, 1.0, n_pos) + a + m * pos_set
    neg = rng.normal(0.0, 1.0, n_neg) + m * neg_set
    return BinormalSample(target_auc, m, pos, neg, pos_set, neg_set)


def to_exam_records(sample: BinormalSample, attribute: str = "set", prefix: str = "sim") -> pd.DataFrame:
    """
    Exam frame of a simulated draw.

    Scores pass through the logistic function so they lie in (0, 1); the map
    is strictly increasing, so every AUC is unchanged. The set of each case is
    exposed as attribute values set0/set1.
    """
    raw = np.concatenate([sample.pos, sample.neg])
    sets = np.concatenate([sample.pos_set, sample.neg_set])
    labels = [ExamLabel.CANCER.value] * sample.pos.size + [ExamLabel.NON_CANCER.value] * sample.neg.size
    ids = [f"{prefix}-{i}" for i in range(raw.size)]
    return pd.DataFrame(
        {
            "exam_id": ids,
            "patient_id": ids,
            "score": special.expit(raw),
            "label": labels,
            attribute: np.where(sets == 1, "set1", "set0"),
        }
    )


def _summarize(deltas: List[float], analytic: List[float], p0s: List[float], p1s: List[float]) -> Dict[str, float]:
    arr = np.asarray(deltas)
    return {
        "mean_delta": float(arr.mean()),
        "std_delta": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        "analytic_delta": float(np.mean(analytic)),
        "mean_p0": float(np.mean(p0s)),
        "mean_p1": float(np.mean(p1s)),
    }


def _check_sizes(size_range: Tuple[int, int]) -> Tuple[int, int]:
    lo, hi = int(size_range[0]), int(size_range[1])
    if lo < 1 or hi < lo:
        raise InputValidationError(f"size range must satisfy 1 <= lo <= hi, got {size_range}")
    return lo, hi


def _check_axis(name: str, values: Sequence[float], lo: float = -math.inf, hi: float = math.inf) -> List[float]:
    values = [float(v) for v in values]
    if not values:
        raise InputValidationError(f"{name} axis is empty")
    for v in values:
        if not (lo <= v <= hi) or not math.isfinite(v):
            raise InputValidationError(f"{name} axis value {v} outside [{lo}, {hi}]")
    return values


def run_prevalence_bias_sweep(
    target_aucs: Sequence[float],
    prevalence_axis: Sequence[float],
    bias_axis: Sequence[float],
    repetitions: int = 100,
    size_range: Tuple[int, int] = (10000, 40000),
    seed: int = 0,
    set0_prevalence: float = 0.2,
    threads: int = 1,
    progress: bool = False,
) -> SweepGrid:
    """
    Mean (combined AUC - target AUC) over a grid of Set 1 prevalence and bias.

    Set 0 keeps set0_prevalence and no bias. Each repetition draws both set
    sizes uniformly from size_range, so the realized mix varies; the cell
    also records the closed form evaluated at each realized mix.

    Args:
        target_aucs: Within-set AUCs
        prevalence_axis: Set 1 positive prevalences, each in (0, 1)
        bias_axis: Model bias values m
        repetitions: Simulations per cell
        size_range: Inclusive (lo, hi) for each set size
        seed: Run seed; cell (t, i, j) repetition r uses stream (seed, t, i, j, r)
        set0_prevalence: Prevalence of the unbiased set
        threads: Worker threads
        progress: Show a progress bar
    """
    targets = _check_axis("target AUC", target_aucs, 0.0, 1.0)
    if any(t in (0.0, 1.0) for t in targets):
        raise InputValidationError("target AUC must lie in the open interval (0, 1)")
    prevalences = _check_axis("prevalence", prevalence_axis, 0.0, 1.0)
    biases = _check_axis("bias", bias_axis)
    if repetitions < 1:
        raise InputValidationError(f"repetitions must be >= 1, got {repetitions}")
    lo, hi = _check_sizes(size_range)

    keys = list(itertools.product(range(len(targets)), range(len(biases)), range(len(prevalences))))

    def run_cell(key: Tuple[int, int, int]) -> SweepCell:
        ti, bi, pi = key
        target, m, prevalence = targets[ti], biases[bi], prevalences[pi]
        deltas, analytic, p0s, p1s = [], [], [], []
        for r in range(repetitions):
            rng = stream(seed, ti, bi, pi, r)
            n0, n1 = (int(x) for x in rng.integers(lo, hi, size=2, endpoint=True))
            sample = _sample_sets(target, m, set0_prevalence, prevalence, n0, n1, rng)
            deltas.append(sample.empirical_auc() - target)
            analytic.append(sample.analytic_delta())
            mix = sample.realized_mix
            p0s.append(mix.p0)
            p1s.append(mix.p1)
        return SweepCell(
            coords={"target_auc": target, "bias": m, "prevalence": prevalence},
            repetitions=repetitions,
            **_summarize(deltas, analytic, p0s, p1s),
        )

    logger.info(
        "Prevalence-bias sweep: %d targets x %d biases x %d prevalences x %d repetitions",
        len(targets), len(biases), len(prevalences), repetitions,
    )
    cells = ordered_map(run_cell, keys, threads=threads, progress=progress, desc="prevalence-bias sweep")
    return SweepGrid(
        mode="prevalence-bias",
        axes={"target_auc": targets, "bias": biases, "prevalence": prevalences},
        crossing_axis="prevalence",
        repetitions=repetitions,
        cells=cells,
    )


def run_p0p1_sweep(
    target_auc: Union[float, Sequence[float]],
    m_values: Sequence[float],
    p_axis: Sequence[float],
    sizes: Tuple[int, int] = (100, 10000),
    repetitions: int = 100,
    seed: int = 0,
    threads: int = 1,
    progress: bool = False,
) -> SweepGrid:
    """
    Mean (combined AUC - target AUC) over a (p0, p1) grid for each m.

    Each repetition draws the positive and negative counts uniformly from
    sizes and assigns every case to Set 1 by a Bernoulli draw.
    """
    targets = _check_axis("target AUC", [target_auc] if np.ndim(target_auc) == 0 else target_auc, 0.0, 1.0)
    if any(t in (0.0, 1.0) for t in targets):
        raise InputValidationError("target AUC must lie in the open interval (0, 1)")
    ms = _check_axis("m", m_values)
    ps = _check_axis("p", p_axis, 0.0, 1.0)
    if repetitions < 1:
        raise InputValidationError(f"repetitions must be >= 1, got {repetitions}")
    lo, hi = _check_sizes(sizes)

    keys = list(itertools.product(range(len(targets)), range(len(ms)), range(len(ps)), range(len(ps))))

    def run_cell(key: Tuple[int, int, int, int]) -> SweepCell:
        ti, mi, i0, i1 = key
        target, m = targets[ti], ms[mi]
        mix = SamplingMix(p0=ps[i0], p1=ps[i1])
        deltas, analytic, p0s, p1s = [], [], [], []
        for r in range(repetitions):
            rng = stream(seed, ti, mi, i0, i1, r)
            n_pos, n_neg = (int(x) for x in rng.integers(lo, hi, size=2, endpoint=True))
            sample = sample_bernoulli_mix(target, m, mix, n_pos, n_neg, rng)
            deltas.append(sample.empirical_auc() - target)
            analytic.append(sample.analytic_delta())
            realized = sample.realized_mix
            p0s.append(realized.p0)
            p1s.append(realized.p1)
        return SweepCell(
            coords={"target_auc": target, "m": m, "p0": mix.p0, "p1": mix.p1},
            repetitions=repetitions,
            **_summarize(deltas, analytic, p0s, p1s),
        )

    logger.info(
        "p0/p1 sweep: %d targets x %d m values x %d^2 cells x %d repetitions",
        len(targets), len(ms), len(ps), repetitions,
    )
    cells = ordered_map(run_cell, keys, threads=threads, progress=progress, desc="p0/p1 sweep")
    return SweepGrid(
        mode="p0p1",
        axes={"target_auc": targets, "m": ms, "p0": ps, "p1": ps},
        crossing_axis="p1",
        repetitions=repetitions,
        cells=cells,
    )


def analytic_p0p1_grid(target_auc: Union[float, Sequence[float]], m_values: Sequence[float], p_axis: Sequence[float]) -> SweepGrid:
    """Closed-form companion of run_p0p1_sweep (no sampling)."""
    targets = _check_axis("target AUC", [target_auc] if np.ndim(target_auc) == 0 else target_auc, 0.0, 1.0)
    ms = _check_axis("m", m_values)
    ps = _check_axis("p", p_axis, 0.0, 1.0)
    cells = []
    for target, m, p0, p1 in itertools.product(targets, ms, ps, ps):
        delta = combined_auc_delta(target, m, SamplingMix(p0=p0, p1=p1))
        cells.append(
            SweepCell(
                coords={"target_auc": target, "m": m, "p0": p0, "p1": p1},
                mean_delta=delta, std_delta=0.0, repetitions=1,
                mean_p0=p0, mean_p1=p1, analytic_delta=delta,
            )
        )
    return SweepGrid(
        mode="p0p1-analytic",
        axes={"target_auc": targets, "m": ms, "p0": ps, "p1": ps},
        crossing_axis="p1",
        repetitions=1,
        cells=cells,
    )


def _crossings_along(xs: List[float], ds: List[float]) -> List[float]:
    nonzero = [i for i, d in enumerate(ds) if d != 0.0]
    found = []
    for i, k in zip(nonzero, nonzero[1:]):
        if (ds[i] < 0) == (ds[k] < 0):
            continue
        if k == i + 1:
            found.append(xs[i] + (0.0 - ds[i]) * (xs[k] - xs[i]) / (ds[k] - ds[i]))
        else:
            # exact zeros between opposite signs: report the middle of the zero run
            found.append(float(np.mean(xs[i + 1:k])))
    return found


def find_zero_crossings(grid: SweepGrid, axis: Optional[str] = None) -> List[ZeroCrossing]:
    """
    Where the mean delta changes sign along one axis, per row of the others.

    Crossings are placed by linear interpolation between adjacent cells; rows
    without a sign change contribute nothing.
    """
    axis = axis or grid.crossing_axis
    if axis not in grid.axes:
        raise InputValidationError(f"grid has no axis {axis!r}; axes: {list(grid.axes)}")
    others = [name for name in grid.axes if name != axis]
    rows: Dict[Tuple[float, ...], List[Tuple[float, float]]] = {}
    for cell in grid.cells:
        key = tuple(cell.coords[name] for name in others)
        rows.setdefault(key, []).append((cell.coords[axis], cell.mean_delta))
    crossings = []
    for key, points in rows.items():
        points.sort()
        for value in _crossings_along([x for x, _ in points], [d for _, d in points]):
            crossings.append(ZeroCrossing(coords=dict(zip(others, key)), axis=axis, value=value))
    return crossings


def grid_to_frame(grid: SweepGrid) -> pd.DataFrame:
    """One row per cell: axis coordinates, mean/std delta, repetitions."""
    records = []
    for cell in grid.cells:
        record = dict(cell.coords)
        record.update(
            mean_delta=cell.mean_delta,
            std_delta=cell.std_delta,
            repetitions=cell.repetitions,
            mean_p0=cell.mean_p0,
            mean_p1=cell.mean_p1,
            analytic_delta=cell.analytic_delta,
        )
        records.append(record)
    return pd.DataFrame.from_records(records)


def crossings_to_frame(crossings: Sequence[ZeroCrossing]) -> pd.DataFrame:
    records = []
    for crossing in crossings:
        record = dict(crossing.coords)
        record[crossing.axis] = crossing.value
        records.append(record)
    return pd.DataFrame.from_records(records)


class BinormalModule(BaseModule):
    """
    Binormal module: closed-form AUC paradox and its Monte Carlo simulation.
    """

    def operations(self) -> List[str]:
        return [
            "normal_cdf",
            "normal_quantile",
            "separation_from_auc",
            "analytic_auc",
            "combined_auc_delta",
            "sample_combined",
            "run_prevalence_bias_sweep",
            "run_p0p1_sweep",
            "analytic_p0p1_grid",
            "find_zero_crossings",
        ]

    def get_description(self) -> str:
        return "Binormal model of the AUC paradox with closed-form oracle and parameter sweeps"

    @property
    def threads(self) -> int:
        return int(self.config.get("threads", 1))

    def prevalence_bias_sweep(self, preset, seed: Optional[int] = None, target_aucs=None, progress: bool = False) -> SweepGrid:
        """Run the prevalence/bias sweep with a SimulationPreset's axes."""
        return run_prevalence_bias_sweep(
            target_aucs=target_aucs or preset.target_aucs,
            prevalence_axis=preset.prevalence_axis.values(),
            bias_axis=preset.bias_axis.values(),
            repetitions=preset.repetitions,
            size_range=tuple(preset.size_range),
            seed=self.seed if seed is None else seed,
            set0_prevalence=preset.set0_prevalence,
            threads=self.threads,
            progress=progress,
        )

    def p0p1_sweep(
        self, preset, seed: Optional[int] = None, target_aucs=None, m_values=None, progress: bool = False
    ) -> SweepGrid:
        """Run the p0/p1 sweep with a SimulationPreset's axes."""
        return run_p0p1_sweep(
            target_auc=target_aucs or preset.target_aucs,
            m_values=m_values if m_values is not None else preset.m_values,
            p_axis=preset.p_axis.values(),
            sizes=tuple(preset.p0p1_size_range),
            repetitions=preset.repetitions,
            seed=self.seed if seed is None else seed,
            threads=self.threads,
            progress=progress,
        )
