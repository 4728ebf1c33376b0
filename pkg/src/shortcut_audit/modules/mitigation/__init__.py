from .mitigation import (
    WEIGHT_SEMANTICS,
    FilterResult,
    MitigationModule,
    balanced_weights,
    expected_cell_draws,
    feasible_range,
    filter_by_attribute,
    prevalence_matched_eval,
    write_weight_table,
)

__all__ = [
    "WEIGHT_SEMANTICS",
    "FilterResult",
    "MitigationModule",
    "balanced_weights",
    "expected_cell_draws",
    "feasible_range",
    "filter_by_attribute",
    "prevalence_matched_eval",
    "write_weight_table",
]
