from .binormal import (
    BinormalModule,
    BinormalSample,
    analytic_auc,
    analytic_p0p1_grid,
    class_counts,
    combined_auc_analytic,
    combined_auc_delta,
    crossings_to_frame,
    delta_terms,
    find_zero_crossings,
    grid_to_frame,
    normal_cdf,
    normal_quantile,
    run_p0p1_sweep,
    run_prevalence_bias_sweep,
    sample_bernoulli_mix,
    sample_combined,
    separation_from_auc,
    to_exam_records,
)

__all__ = [
    "BinormalModule",
    "BinormalSample",
    "analytic_auc",
    "analytic_p0p1_grid",
    "class_counts",
    "combined_auc_analytic",
    "combined_auc_delta",
    "crossings_to_frame",
    "delta_terms",
    "find_zero_crossings",
    "grid_to_frame",
    "normal_cdf",
    "normal_quantile",
    "run_p0p1_sweep",
    "run_prevalence_bias_sweep",
    "sample_bernoulli_mix",
    "sample_combined",
    "separation_from_auc",
    "to_exam_records",
]
