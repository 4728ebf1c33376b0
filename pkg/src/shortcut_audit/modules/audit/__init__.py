from .audit import (
    AuditModule,
    attribute_values,
    bias_gap,
    bias_subsets,
    composition_breakdown,
    composition_sweep,
    curve_to_frame,
    distribution_comparison,
    distribution_to_frame,
    estimate_auc,
    prevalence_table,
    resolve_high_value,
    run_battery,
    stratified_auc_breakdown,
    stratified_auc_report,
)

__all__ = [
    "AuditModule",
    "attribute_values",
    "bias_gap",
    "bias_subsets",
    "composition_breakdown",
    "composition_sweep",
    "curve_to_frame",
    "distribution_comparison",
    "distribution_to_frame",
    "estimate_auc",
    "prevalence_table",
    "resolve_high_value",
    "run_battery",
    "stratified_auc_breakdown",
    "stratified_auc_report",
]
