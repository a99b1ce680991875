# File: /cqnls/utils/paths.py
"""
Output directory layout for cqnls artifacts.
"""

from __future__ import annotations
from pathlib import Path

from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

RUN_CSV = "run.csv"
VIRIAL_CSV = "virial.csv"
MODULATION_CSV = "modulation.csv"
IDENTITIES_CSV = "identities.csv"
SWEEP_CSV = "sweep.csv"
SUMMARY_JSON = "summary.json"
PLOT_SCRIPT = "plot_run.py"


def prepare_output_dir(base_dir: Path) -> Path:
    base_dir = Path(base_dir)
    base_dir.mkdir(parents=True, exist_ok=True)
    return base_dir


def run_dir(base_dir: Path, index: int) -> Path:
    """run_000, run_001, ... under base_dir."""
    path = Path(base_dir) / f"run_{index:03d}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def list_run_dirs(base_dir: Path) -> list[Path]:
    base_dir = Path(base_dir)
    if not base_dir.exists():
        return []
    return sorted(p for p in base_dir.iterdir() if p.is_dir() and p.name.startswith("run_"))
