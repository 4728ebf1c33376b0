"""
Base module class for all shortcut-audit modules.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, List

from ..config import BootstrapSettings


class BaseModule(ABC):
    """
    Base class for all shortcut-audit modules.

    A module binds one functional area (ingestion, metrics, ...) to the
    configuration subsection it was built with. The operations themselves
    are plain functions in the module's package; module methods fill in
    configured defaults and delegate to them.
    """

    def __init__(self, config: Dict[str, Any]):
        """
        Initialize base module.

        Args:
            config: Module configuration
        """
        self.config = config or {}

    @property
    def seed(self) -> int:
        return int(self.config.get("seed", 0))

    def bootstrap_settings(self, **overrides: Any) -> BootstrapSettings:
        """Configured bootstrap settings with per-call overrides applied."""
        values = dict(self.config.get("bootstrap", {}))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return BootstrapSettings(**values)

    @abstractmethod
    def operations(self) -> List[str]:
        """
        Names of the public operations this module exposes.
        Must be implemented by each module.
        """
        pass

    def get_info(self) -> Dict[str, Any]:
        """
        Get module information.

        Returns:
            Module information dictionary
        """
        return {
            "name": self.__class__.__name__,
            "description": self.get_description(),
            "operations": self.operations(),
            "config": self.config,
        }

    @abstractmethod
    def get_description(self) -> str:
        """
        Get module description.
        Must be implemented by each module.

        Returns:
            Module description
        """
        pass
