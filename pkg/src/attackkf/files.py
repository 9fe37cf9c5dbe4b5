"""Deterministic CSV/JSON emitters and the measurement-file reader."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np


class DataFileError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def table_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    return v


def write_table(path: Path, header, rows, format="csv") -> Path:
    """Write rows as CSV, or as a JSON list of records when ``format == 'json'``."""
    path = Path(path)
    if format == "json":
        path = path.with_suffix(".json")
        records = [{h: _plain(v) for h, v in zip(header, row)} for row in rows]
        text = json_text(records)
    else:
        path = path.with_suffix(".csv")
        text = table_text(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_json(path: Path, obj) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json_text(obj))
    return Path(path)


def read_measurements(path, n_z=None) -> np.ndarray:
    """Read ``step,y1..yn`` rows; steps must run 1, 2, 3, ... without gaps.

    Errors carry the 1-based line number of the offending row.
    """
    path = Path(path)
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as e:
        raise DataFileError(f"cannot open: {e.strerror}", path=path) from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFileError("empty file", line=1, path=path) from None
        if not header or header[0].strip() != "step" or len(header) < 2:
            raise DataFileError("header must start with 'step' followed by measurement columns", 1, path)
        width = len(header)
        if n_z is not None and width - 1 != n_z:
            raise DataFileError(
                f"dimension mismatch: file has {width - 1} measurement columns, model expects {n_z}", 1, path
            )
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataFileError(f"expected {width} columns, found {len(row)}", line, path)
            try:
                step = int(row[0])
            except ValueError:
                raise DataFileError(f"step index {row[0]!r} is not an integer", line, path) from None
            if step != len(rows) + 1:
                raise DataFileError(f"step index {step} out of sequence, expected {len(rows) + 1}", line, path)
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError:
                bad = next(c for c in row[1:] if not _is_float(c))
                raise DataFileError(f"non-numeric value {bad!r}", line, path) from None
            if not all(np.isfinite(vals)):
                raise DataFileError("non-finite value", line, path)
            rows.append(vals)
    if not rows:
        raise DataFileError("no data rows", path=path)
    return np.array(rows)


def _is_float(s) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False
