"""
shortcut-audit - shortcut and AUC-paradox auditing for medical-image classifiers.
"""

from typing import Any, Dict, Optional

from .config import AuditConfig, load_config
from .modules import (
    AuditModule,
    BinormalModule,
    IngestionModule,
    MetricsModule,
    MitigationModule,
    ProbeModule,
)


class ShortcutAudit:
    """
    Main class that owns one module object per functional area.
    """

    def __init__(self, config: Optional[AuditConfig] = None):
        """
        Initialize every module from its configuration subsection.

        Args:
            config: Resolved configuration; packaged defaults when omitted
        """
        self.config = config or load_config(dotenv=False)

        self.ingestion = IngestionModule(self.config.module_config("ingestion"))
        self.metrics = MetricsModule(self.config.module_config("metrics"))
        self.binormal = BinormalModule(self.config.module_config("binormal"))
        self.audit = AuditModule(self.config.module_config("audit"))
        self.probe = ProbeModule(self.config.module_config("probe"))
        self.mitigation = MitigationModule(self.config.module_config("mitigation"))

        self.modules = {
            "ingestion": self.ingestion,
            "metrics": self.metrics,
            "binormal": self.binormal,
            "audit": self.audit,
            "probe": self.probe,
            "mitigation": self.mitigation,
        }

    def get_module(self, name: str):
        """
        Get a module by name (ingestion, metrics, binormal, audit, probe, mitigation).
        """
        if name not in self.modules:
            raise ValueError(f"Module {name} not found. Available modules: {list(self.modules.keys())}")
        return self.modules[name]

    def get_all_modules_info(self) -> Dict[str, Any]:
        """
        Get information about all modules.
        """
        return {name: module.get_info() for name, module in self.modules.items()}
