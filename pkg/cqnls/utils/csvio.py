# File: /cqnls/utils/csvio.py
"""
Versioned CSV artifacts.
The first line is "# schema=<name> version=<int>"; floats use %.17g so a
read-back reproduces every double exactly.
"""

from __future__ import annotations
import re
import tempfile
from pathlib import Path
from typing import Iterable, Tuple

import pandas as pd

from cqnls.errors import CqnlsError
from cqnls.utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
_HEADER = re.compile(r"^# schema=(?P<name>[A-Za-z0-9_]+) version=(?P<version>\d+)$")


class SchemaMismatchError(CqnlsError):
    pass


def write_artifact_csv(path: Path, frame: pd.DataFrame, schema: str, columns: Iterable[str]) -> Path:
    """Write frame[columns] atomically under a schema header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(columns)
    frame = frame.reindex(columns=columns)

    tmp = tempfile.NamedTemporaryFile("w", delete=False, encoding="utf-8", newline="", dir=path.parent)
    try:
        tmp.write(f"# schema={schema} version={SCHEMA_VERSION}\n")
        frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        tmp.flush()
    finally:
        tmp.close()
    Path(tmp.name).replace(path)
    logger.debug("Wrote %s (%d rows)", path, len(frame))
    return path


def read_artifact_csv(path: Path, schema: str | None = None) -> Tuple[str, int, pd.DataFrame]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    match = _HEADER.match(first)
    if not match:
        raise SchemaMismatchError(f"{path} does not start with a schema header")
    name, version = match["name"], int(match["version"])
    if schema is not None and name != schema:
        raise SchemaMismatchError(f"{path} has schema {name}, expected {schema}")
    frame = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    return name, version, frame
