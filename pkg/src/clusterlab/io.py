"""CSV and JSON input/output with bit-stable float formatting."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from clusterlab.core import Window


class IngestError(ValueError):
    pass


def fmt(v) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return "" if v is None else str(v)


def write_csv(path, header, rows) -> None:
    """RFC 4180 CSV, UTF-8, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(k) for k in header]
            w.writerow([fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def ingest_csv(path) -> Window:
    """Numeric CSV (one or more columns, optional header) as a Window."""
    rows = []
    width = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            cells = [c.strip() for c in rec]
            if not rows and width is None and not all(_is_number(c) for c in cells):
                width = len(cells)  # header line
                continue
            if width is not None and len(cells) != width:
                raise IngestError(f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
            width = len(cells)
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(c for c in cells if not _is_number(c))
                raise IngestError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise IngestError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return Window(arr[:, 0] if arr.shape[1] == 1 else arr)
