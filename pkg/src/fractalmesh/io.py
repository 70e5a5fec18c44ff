"""CSV and JSON helpers shared by the command-line outputs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path


def _cell(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path, columns, rows) -> Path:
    """Write dict rows with a fixed column order; floats keep full precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])
    return path


def _parse(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, doc) -> Path:
    """Strict JSON (non-finite floats become null), sorted keys."""
    path = Path(path)
    path.write_text(json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
