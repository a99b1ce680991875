# File: /cqnls/runconfig.py
"""
Run configuration: one TOML file, validated by pydantic with unknown keys
rejected in every section. Command-line overrides are dotted
section.key=value pairs applied to the raw document before validation.
"""

from __future__ import annotations
import copy
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import toml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, ValidationInfo, field_validator

from cqnls.errors import InvalidConfigError
from cqnls.experiments.families import Gaussian, Shape, Side
from cqnls.experiments.sweep import SweepEntry
from cqnls.solver.dynamics import IntegratorConfig
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)


class GridSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    r_max: PositiveFloat = 128.0
    n: int = Field(16383, ge=1)


class ExperimentSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Shape = Field(default_factory=lambda: Gaussian(sigma=2.0))
    side: Side = Side.BELOW
    tol: PositiveFloat = 1e-10
    energy_fraction: PositiveFloat = 1.0
    amplitude: Optional[float] = Field(None, ge=0.0, description="fixed amplitude; skips threshold tuning")
    virial_R: Optional[float] = Field(None, ge=1.0)


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dir: Path = Path("runs")
    emit_plots: bool = False


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    grid: GridSection = Field(default_factory=GridSection)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    output: OutputSection = Field(default_factory=OutputSection)
    sweep: List[SweepEntry] = Field(default_factory=list)

    @field_validator("sweep")
    @classmethod
    def _entries_resolve(cls, entries: List[SweepEntry], info: ValidationInfo) -> List[SweepEntry]:
        base = info.data.get("integrator")
        if base is not None:
            for i, entry in enumerate(entries):
                try:
                    entry.resolve(base)
                except ValidationError as e:
                    raise ValueError(f"sweep[{i}].integrator: {e.errors()[0]['msg']}") from e
        return entries


def _parse_value(raw: str) -> Any:
    try:
        return toml.loads(f"value = {raw}")["value"]
    except toml.TomlDecodeError:
        return raw


def apply_overrides(doc: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Set section.key=value pairs in the raw document."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise InvalidConfigError(item, "override must look like section.key=value")
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise InvalidConfigError(key, f"'{part}' is not a section")
            node = child
        node[parts[-1]] = _parse_value(raw.strip())
        logger.debug("Override %s = %r", key, node[parts[-1]])
    return doc


def _error_key(error: ValidationError) -> str:
    first = error.errors()[0]
    return ".".join(str(p) for p in first["loc"]) or "<root>"


def parse_run_config(doc: Dict[str, Any], overrides: Iterable[str] = ()) -> RunConfig:
    doc = apply_overrides(copy.deepcopy(doc), overrides)
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as e:
        first = e.errors()[0]
        raise InvalidConfigError(_error_key(e), first["msg"]) from e


def load_run_config(path: Optional[Path], overrides: Iterable[str] = ()) -> RunConfig:
    """Read a TOML run config; None means all defaults."""
    doc: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            doc = toml.load(path)
        except FileNotFoundError as e:
            raise InvalidConfigError(str(path), "config file not found") from e
        except toml.TomlDecodeError as e:
            raise InvalidConfigError(str(path), f"TOML parse error: {e}") from e
    cfg = parse_run_config(doc, overrides)
    logger.info("Loaded run config %s (grid n=%d r_max=%g)", path or "<defaults>", cfg.grid.n, cfg.grid.r_max)
    return cfg
