"""Column-oriented result tables with CSV and JSON emission.

CSV files start with ``#``-prefixed metadata lines (``# key: <json>``),
followed by a header row. Numbers are written with 12 significant digits and
failed cells as ``nan``. The last column, ``error``, holds the error code of
a failed row and is empty otherwise.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

SIGNIFICANT_DIGITS = 12


def format_number(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value) + 0.0  # drops the sign of -0.0
    if math.isnan(value):
        return "nan"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def _json_number(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(format_number(value))


def _plain(obj):
    """Metadata values converted to JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_number(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


@dataclass
class SweepResult:
    """Tabulated observables over a grid.

    Attributes
    ----------
    columns : dict
        Ordered mapping of column name to a 1-D array; the first column is
        the leading independent variable.
    errors : list of str
        One entry per row, empty for successful rows.
    metadata : dict
        Provenance and run report (JSON-serializable).
    """

    columns: dict
    errors: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1 or (lengths and lengths.pop() != len(self.errors)):
            raise ValueError("all columns and the error list must have equal length")
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}

    @property
    def names(self) -> list:
        return list(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.errors)

    @property
    def n_failed(self) -> int:
        return sum(1 for e in self.errors if e)

    def __getitem__(self, name):
        return self.columns[name]

    def rows(self):
        cols = list(self.columns.values())
        for i in range(self.n_rows):
            yield [c[i] for c in cols], self.errors[i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in sorted(_plain(self.metadata).items()):
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names + ["error"])
        for values, err in self.rows():
            writer.writerow([format_number(v) for v in values] + [err])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "metadata": _plain(self.metadata),
            "columns": self.names + ["error"],
            "rows": [[_json_number(v) for v in values] + [err] for values, err in self.rows()],
        }
        return json.dumps(payload, sort_keys=True, indent=1, allow_nan=False) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ConfigError(f"unknown output format {fmt!r}; use csv or json")

    def write(self, path, fmt: str = "csv") -> None:
        Path(path).write_text(self.render(fmt))


def _float_or_nan(text):
    if text is None:
        return math.nan
    return float(text)


def parse_csv(text: str) -> SweepResult:
    metadata, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            metadata[key] = json.loads(value)
        else:
            body.append(line)
    reader = list(csv.reader(body))
    header, records = reader[0], reader[1:]
    names = header[:-1]
    columns = {n: np.array([_float_or_nan(r[i]) for r in records]) for i, n in enumerate(names)}
    return SweepResult(columns, [r[-1] for r in records], metadata)


def parse_json(text: str) -> SweepResult:
    payload = json.loads(text)
    names = payload["columns"][:-1]
    rows = payload["rows"]
    columns = {n: np.array([_float_or_nan(r[i]) for r in rows]) for i, n in enumerate(names)}
    return SweepResult(columns, [r[-1] for r in rows], payload["metadata"])


def read_table(path) -> SweepResult:
    """Load a table written by :meth:`SweepResult.write` (format from suffix)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_csv(text)


def tables_equivalent(a: SweepResult, b: SweepResult, rtol: float = 1e-11) -> bool:
    """Same column names, error codes and numbers (NaN matching NaN)."""
    if a.names != b.names or list(a.errors) != list(b.errors):
        return False
    return all(
        np.allclose(a[n].astype(float), b[n].astype(float), rtol=rtol, atol=0, equal_nan=True)
        for n in a.names
    )
