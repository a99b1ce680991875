# File: /cqnls/utils/config.py
"""
Process-level settings for cqnls.
Reads cqnls/config/settings.json (or the file named by CQNLS_SETTINGS)
and merges it over built-in defaults.
"""

from __future__ import annotations
import json
import logging
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

ROOT = Path(__file__).resolve().parents[1]
SETTINGS_PATH = ROOT / "config" / "settings.json"

_DEFAULTS: Dict[str, Any] = {
    "log_json": True,
    "log_level": "INFO",
    "modulation_gate": 0.2,
    "blowup_factor": 3.0,
    "boundary_tol": 1e-10,
    "max_workers": 4,
    "run_timeout_seconds": None,
}


def settings_path() -> Path:
    load_dotenv()
    override = os.getenv("CQNLS_SETTINGS")
    return Path(override) if override else SETTINGS_PATH


@lru_cache(maxsize=1)
def load_settings() -> Dict[str, Any]:
    """Return cached settings dict, falling back to defaults."""
    path = settings_path()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise ValueError("settings root must be an object")
        unknown = sorted(set(cfg) - set(_DEFAULTS))
        if unknown:
            logger.warning("Ignoring unknown settings keys in %s: %s", path, unknown)
        return {**_DEFAULTS, **{k: v for k, v in cfg.items() if k in _DEFAULTS}}
    except Exception as e:
        logger.warning("Failed to load settings %s, using defaults: %s", path, e)
        return _DEFAULTS.copy()


def get_setting(key: str) -> Any:
    return load_settings().get(key, _DEFAULTS.get(key))
