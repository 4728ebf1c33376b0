"""
shortcut-audit - shortcut and AUC-paradox auditing for medical-image classifiers.
"""

__version__ = "1.0.0"

from .config import AuditConfig, load_config
from .core import ShortcutAudit
from .exceptions import (
    InputValidationError,
    SamplingError,
    SchemaViolationError,
    ShortcutAuditError,
    UndefinedMetricError,
)
from .modules import *

__all__ = [
    "AuditConfig",
    "ShortcutAudit",
    "load_config",
    "InputValidationError",
    "SamplingError",
    "SchemaViolationError",
    "ShortcutAuditError",
    "UndefinedMetricError",
    "BaseModule",
    "IngestionModule",
    "MetricsModule",
    "BinormalModule",
    "AuditModule",
    "ProbeModule",
    "MitigationModule",
]
