"""CSV/JSON helpers shared by the file-emitting parts of the package."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

SCHEMA_VERSION = 1

_TRUE = {"true"}
_FALSE = {"false"}


def _fmt(value):
    if isinstance(value, bool) or isinstance(value, (list, tuple)):
        return str(value).lower() if isinstance(value, bool) else value
    if isinstance(value, float):
        return repr(value)
    return value


def write_csv(path, columns, rows) -> None:
    """Write dict rows with a fixed column order; floats use ``repr`` (round-trip exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: _fmt(row[c]) for c in columns})


def _parse(text: str):
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path):
    """Read a CSV written by :func:`write_csv`: ``(columns, rows)`` with typed values."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [{k: _parse(v) for k, v in row.items()} for row in reader]
        return list(reader.fieldnames or []), rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _jsonable(obj.item()) if getattr(obj, "ndim", 0) == 0 else _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, payload) -> None:
    data = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
