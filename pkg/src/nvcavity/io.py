"""Data ingestion and deterministic result persistence.

CSV contract: delimiter ",", decimal point ".", UTF-8, Unix newlines,
numeric fields formatted to 9 significant digits so identical runs are
byte-identical and re-ingestion reproduces values to 1e-8 relative.
"""

import csv
import json
import os
import warnings

import numpy as np

from .errors import ValidationError


def load_csv_series(path, schema):
    """Load a CSV whose header must equal ``schema`` (names, in order).

    Comment lines starting with '#' are skipped. Rows with non-finite
    values are rejected with their row numbers. Returns a dict of numpy
    arrays keyed by column name.
    """
    schema = tuple(schema)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [
            (lineno, row)
            for lineno, row in enumerate(csv.reader(fh), start=1)
            if row and not row[0].lstrip().startswith("#")
        ]
    if not rows:
        raise ValidationError(f"{path}: empty file, expected header {schema}")
    header_line, header = rows[0]
    header = tuple(h.strip() for h in header)
    if header != schema:
        raise ValidationError(
            f"{path}: header mismatch at line {header_line}: expected {list(schema)}, "
            f"found {list(header)}"
        )
    columns = {name: [] for name in schema}
    bad_rows = []
    for lineno, row in rows[1:]:
        if len(row) != len(schema):
            raise ValidationError(
                f"{path}: line {lineno}: expected {len(schema)} columns, found {len(row)}"
            )
        try:
            vals = [float(x) for x in row]
        except ValueError:
            raise ValidationError(f"{path}: line {lineno}: non-numeric value in {row}") from None
        if not all(np.isfinite(vals)):
            bad_rows.append(lineno)
            continue
        for name, v in zip(schema, vals):
            columns[name].append(v)
    if bad_rows:
        raise ValidationError(f"{path}: non-finite values on rows {bad_rows}")
    return {name: np.array(vals, dtype=float) for name, vals in columns.items()}


def format_float(x):
    """Canonical 9-significant-digit representation."""
    return f"{x:.9g}"


def _round9(x):
    return float(f"{x:.9g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return _round9(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_table(path, header, rows):
    """Write a CSV table with the deterministic-format contract.

    Empty tables produce a header-only file and a warning.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")
    if not rows:
        warnings.warn(f"{path}: empty table, wrote header only", stacklevel=2)
    return path


def write_json(path, payload):
    """Write a JSON report with sorted keys and 9-significant-digit floats."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_results(path, header, rows, fmt="csv"):
    """Persist a table as CSV or as a JSON list of row objects."""
    if fmt == "csv":
        return write_table(path, header, rows)
    if fmt == "json":
        payload = [dict(zip(header, row)) for row in rows]
        if not rows:
            warnings.warn(f"{path}: empty table", stacklevel=2)
        return write_json(path, payload)
    raise ValidationError(f"unknown output format {fmt!r}")
