"""
Configuration for shortcut-audit.

Precedence, lowest first: packaged defaults.yaml, a user YAML file, the
environment (optionally from a .env file), explicit overrides.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from .exceptions import InputValidationError

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).with_name("defaults.yaml")

ENV_SEED = "SHORTCUT_AUDIT_SEED"
ENV_THREADS = "SHORTCUT_AUDIT_THREADS"
ENV_LOG_LEVEL = "SHORTCUT_AUDIT_LOG_LEVEL"


class BootstrapSettings(BaseModel):
    """Percentile bootstrap settings shared by every CI in a report."""

    replicates: int = Field(10000, ge=1)
    level: float = Field(0.95, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0)
    stratified: bool = False
    redraw_factor: int = Field(100, ge=1)
    threads: int = Field(1, ge=1)


class ProbeSettings(BaseModel):
    l2: float = Field(1.0, ge=0.0)
    iterations: int = Field(500, ge=1)
    init_scale: float = Field(0.0, ge=0.0)


class CompositionSettings(BaseModel):
    fractions: List[float] = Field(default_factory=lambda: [i / 10 for i in range(11)])
    subsets_per_point: int = Field(10, ge=1)

    @field_validator("fractions")
    @classmethod
    def validate_fractions(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one fraction is required")
        for f in v:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fractions must lie in [0, 1], got {f}")
        return v


class Linspace(BaseModel):
    """A linearly spaced axis."""

    start: float
    stop: float
    num: int = Field(..., ge=1)

    def values(self) -> List[float]:
        return [float(x) for x in np.linspace(self.start, self.stop, self.num)]


class SimulationPreset(BaseModel):
    target_aucs: List[float]
    set0_prevalence: float = Field(0.2, gt=0.0, lt=1.0)
    prevalence_axis: Linspace
    bias_axis: Linspace
    size_range: Tuple[int, int]
    repetitions: int = Field(..., ge=1)
    m_values: List[float]
    p_axis: Linspace
    p0p1_size_range: Tuple[int, int]

    @model_validator(mode="after")
    def check_ranges(self) -> "SimulationPreset":
        for name in ("size_range", "p0p1_size_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} must satisfy 1 <= lo <= hi, got {(lo, hi)}")
        for t in self.target_aucs:
            if not 0.0 < t < 1.0:
                raise ValueError(f"target AUC must lie in the open interval (0, 1), got {t}")
        return self


class SimulationSettings(BaseModel):
    presets: Dict[str, SimulationPreset]
    aliases: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_aliases(self) -> "SimulationSettings":
        for alias, target in self.aliases.items():
            if target not in self.presets:
                raise ValueError(f"preset alias {alias!r} points to unknown preset {target!r}")
        return self

    def resolve(self, name: str) -> str:
        """Preset name behind an alias, or the name itself."""
        return self.aliases.get(name, name)


class AuditConfig(BaseModel):
    """Resolved configuration handed to ShortcutAudit."""

    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    log_level: str = "INFO"
    bootstrap: BootstrapSettings = Field(default_factory=BootstrapSettings)
    probe: ProbeSettings = Field(default_factory=ProbeSettings)
    composition: CompositionSettings = Field(default_factory=CompositionSettings)
    simulation: SimulationSettings

    def bootstrap_settings(self, **overrides: Any) -> BootstrapSettings:
        """Bootstrap settings carrying the run seed and thread count."""
        values = self.bootstrap.model_dump()
        values.update(seed=self.seed, threads=self.threads)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return BootstrapSettings(**values)

    def preset(self, name: str) -> SimulationPreset:
        resolved = self.simulation.resolve(name)
        if resolved not in self.simulation.presets:
            raise InputValidationError(
                f"unknown simulation preset {name!r}; available: {sorted(self.simulation.presets)}"
                f", aliases: {sorted(self.simulation.aliases)}"
            )
        return self.simulation.presets[resolved]

    def module_config(self, name: str) -> Dict[str, Any]:
        """Config subsection for one module, in the dict form modules expect."""
        sections = {
            "ingestion": {},
            "metrics": {"bootstrap": self.bootstrap_settings().model_dump()},
            "binormal": {"seed": self.seed, "threads": self.threads},
            "audit": {
                "bootstrap": self.bootstrap_settings().model_dump(),
                "composition": self.composition.model_dump(),
            },
            "probe": {
                **self.probe.model_dump(),
                "seed": self.seed,
                "bootstrap": self.bootstrap_settings().model_dump(),
            },
            "mitigation": {"seed": self.seed},
        }
        return sections.get(name, {})


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except FileNotFoundError:
        raise InputValidationError("config file not found", path=path)
    except yaml.YAMLError as e:
        raise InputValidationError(f"invalid YAML: {e}", path=path)
    if not isinstance(data, dict):
        raise InputValidationError("config file must contain a mapping", path=path)
    return data


def _env_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    for var, key in ((ENV_SEED, "seed"), (ENV_THREADS, "threads")):
        raw = os.getenv(var)
        if raw:
            try:
                overrides[key] = int(raw)
            except ValueError:
                raise InputValidationError(f"{var} must be an integer, got {raw!r}")
    level = os.getenv(ENV_LOG_LEVEL)
    if level:
        overrides["log_level"] = level.upper()
    return overrides


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    dotenv: bool = True,
) -> AuditConfig:
    """
    Build the run configuration.

    Args:
        path: Optional user YAML file merged over the packaged defaults
        overrides: Explicit values (CLI flags); None entries are ignored
        dotenv: Load a .env file from the working directory first

    Returns:
        Validated AuditConfig
    """
    if dotenv:
        load_dotenv()
    data = _read_yaml(DEFAULTS_PATH)
    if path is not None:
        data = _deep_merge(data, _read_yaml(Path(path)))
    data = _deep_merge(data, _env_overrides())
    if overrides:
        data = _deep_merge(data, {k: v for k, v in overrides.items() if v is not None})
    try:
        config = AuditConfig(**data)
    except ValueError as e:
        raise InputValidationError(f"invalid configuration: {e}", path=path)
    logger.debug("Resolved configuration: %s", config.model_dump())
    return config
