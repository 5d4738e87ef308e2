"""Writing and reading :class:`ResultTable` objects.

CSV output has one header row and one row per sweep point. Floats are
written with ``repr`` so they round-trip exactly, and every line ends with
``\\n``. The metadata block goes to a sidecar ``<name>.meta.json`` next to
the CSV file. JSON output holds ``{"metadata": ..., "columns": ...,
"data": {column: [values]}}`` in a single file.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any

from .experiments import ResultTable

__all__ = ["emit", "to_csv", "to_json", "read_table", "sidecar_path"]


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(table: ResultTable) -> str:
    data = {c: [r[i] for r in table.rows] for i, c in enumerate(table.columns)}
    doc = {"metadata": table.metadata, "columns": list(table.columns), "data": data}
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def emit(table: ResultTable, path: str | Path | None = None, fmt: str = "csv") -> str:
    """Serialize ``table``; write it to ``path`` when given.

    Returns the serialized body. For CSV files the metadata is written to
    :func:`sidecar_path`.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    body = to_csv(table) if fmt == "csv" else to_json(table)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, encoding="utf-8", newline="")
        if fmt == "csv":
            sidecar_path(path).write_text(json.dumps(table.metadata, indent=2) + "\n", encoding="utf-8")
    return body


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_table(path: str | Path) -> ResultTable:
    """Load a table written by :func:`emit` (CSV with optional sidecar, or JSON)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        cols = tuple(doc["columns"])
        n = len(doc["data"][cols[0]]) if cols else 0
        rows = [tuple(doc["data"][c][i] for c in cols) for i in range(n)]
        return ResultTable(cols, rows, doc.get("metadata", {}))
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [tuple(_number(x) for x in r) for r in reader if r]
    meta_file = sidecar_path(path)
    meta = json.loads(meta_file.read_text(encoding="utf-8")) if meta_file.exists() else {}
    return ResultTable(tuple(header), rows, meta)
