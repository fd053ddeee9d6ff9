"""Versioned CSV tables.

Every file starts with ``#schema=<name>/<version>`` followed by a header row.
Floats are written with ``repr`` so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

SCHEMA_VERSION = 1


class CSVParseError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _fmt(x):
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


@dataclass
class Table:
    schema: str
    columns: list
    rows: list
    path: str = ""

    def column(self, name):
        idx = self.columns.index(name)
        return [r[idx] for r in self.rows]


def write_table(path, schema, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"#schema={schema}/{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        w.writerow([_fmt(x) for x in row])
    path.write_text(buf.getvalue())
    return path


def _value(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path, schema=None):
    """Parse a table; malformed rows raise CSVParseError with the 1-based line number."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("#schema="):
        raise CSVParseError(path, 1, "missing #schema line")
    name, _, version = lines[0][len("#schema=") :].partition("/")
    if schema is not None and name != schema:
        raise CSVParseError(path, 1, f"schema {name!r}, expected {schema!r}")
    if version != str(SCHEMA_VERSION):
        raise CSVParseError(path, 1, f"unsupported schema version {version!r}")
    if len(lines) < 2:
        raise CSVParseError(path, 2, "missing header row")
    reader = csv.reader(lines[1:])
    columns = next(reader)
    rows = []
    for offset, fields in enumerate(reader):
        lineno = offset + 3
        if len(fields) != len(columns):
            raise CSVParseError(path, lineno, f"expected {len(columns)} fields, found {len(fields)}")
        rows.append([_value(f) for f in fields])
    return Table(name, columns, rows, str(path))
