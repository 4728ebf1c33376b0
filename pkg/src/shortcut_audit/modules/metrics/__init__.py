from .metrics import (
    MetricsModule,
    auc,
    auc_from_labels,
    bootstrap_ci,
    bootstrap_with_settings,
    frame_auc,
    ks_statistic,
    quartiles,
    standard_error_auc,
)

__all__ = [
    "MetricsModule",
    "auc",
    "auc_from_labels",
    "bootstrap_ci",
    "bootstrap_with_settings",
    "frame_auc",
    "ks_statistic",
    "quartiles",
    "standard_error_auc",
]
