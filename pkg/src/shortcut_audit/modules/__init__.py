"""
shortcut-audit modules package: one subpackage per functional area.
"""

from .base import BaseModule
from .ingestion import IngestionModule
from .metrics import MetricsModule
from .binormal import BinormalModule
from .audit import AuditModule
from .probe import ProbeModule
from .mitigation import MitigationModule

__all__ = [
    "BaseModule",
    "IngestionModule",
    "MetricsModule",
    "BinormalModule",
    "AuditModule",
    "ProbeModule",
    "MitigationModule",
]
