# File: /cqnls/utils/metadata.py
"""
JSON run summaries, written atomically.
Only the created_at key carries wall-clock time, so two runs of the same
config differ in that key alone.
"""

from __future__ import annotations
import json
import math
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

import git

from cqnls import __version__
from cqnls.utils.logger import get_logger

UTC = timezone.utc  # same object as datetime.UTC (Python 3.11+)

logger = get_logger(__name__)

TIMESTAMP_KEY = "created_at"


def version_string() -> str:
    """git describe of the checkout, or the package version outside one."""
    try:
        repo = git.Repo(Path(__file__).resolve().parents[2], search_parent_directories=True)
        return repo.git.describe("--tags", "--always", "--dirty")
    except Exception as e:
        logger.debug("No git metadata available: %s", e)
        return __version__


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json_atomic(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = tempfile.NamedTemporaryFile("w", delete=False, encoding="utf-8", dir=path.parent)
    try:
        json.dump(_jsonable(data), tmp, indent=2, sort_keys=True, allow_nan=False)
        tmp.write("\n")
        tmp.flush()
    finally:
        tmp.close()
    Path(tmp.name).replace(path)
    logger.debug("Wrote %s", path)
    return path


def build_summary(command: str, **fields: Any) -> Dict[str, Any]:
    summary = {"command": command, "version": version_string(), **fields}
    summary[TIMESTAMP_KEY] = datetime.now(UTC).isoformat()
    return summary


def read_json(path: Path) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
