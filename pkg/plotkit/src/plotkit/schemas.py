"""Readers for the CSV schemas scalesim publishes.

Each file starts with a `# <schema-tag>` comment line and a fixed header row.
Readers verify both before touching any data and raise `SchemaError` with the
offending column named, so a renderer never silently draws the wrong field.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

__all__ = [
    "EmptyDataError",
    "SchemaError",
    "LOSSES_SCHEMA",
    "LOSSES_COLUMNS",
    "PLOTDATA_SCHEMA",
    "PLOTDATA_COLUMNS",
    "read_losses",
    "read_plotdata",
]

LOSSES_SCHEMA = "scalesim-losses-v1"
LOSSES_COLUMNS = ("policy", "alpha", "seed", "total_loss", "mean_step_loss")

PLOTDATA_SCHEMA = "scalesim-plotdata-v1"
PLOTDATA_COLUMNS = ("t", "demand", "quantile_target", "live_hosts")


class SchemaError(ValueError):
    """The file does not match its declared schema; `column` names the culprit."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class EmptyDataError(ValueError):
    """Schema and header are valid but the file holds zero data rows."""


def _check_header(path: Path, got: list[str], want: tuple[str, ...]) -> None:
    if list(got) == list(want):
        return
    for i, (g, w) in enumerate(zip(got, want)):
        if g != w:
            raise SchemaError(
                f"{path}: header column {i + 1} is {g!r}, expected {w!r}",
                column=w,
            )
    if len(got) < len(want):
        missing = want[len(got)]
        raise SchemaError(f"{path}: missing column {missing!r}", column=missing)
    extra = got[len(want)]
    raise SchemaError(f"{path}: unexpected extra column {extra!r}", column=extra)


def _open_checked(path: Path, schema: str, columns: tuple[str, ...]) -> list[list[str]]:
    """Validate tag + header, return raw data rows (cell lists)."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: cannot read file: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {schema}":
        found = lines[0].strip() if lines else "<empty file>"
        raise SchemaError(
            f"{path}: first line is {found!r}, expected '# {schema}'"
        )
    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise SchemaError(f"{path}: missing header row")
    _check_header(path, rows[0], columns)
    data = []
    for lineno, cells in enumerate(rows[1:], start=3):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if cells[0].lstrip().startswith("#"):
            continue
        if len(cells) != len(columns):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(columns)} cells, got {len(cells)}"
            )
        data.append((lineno, cells))
    if not data:
        raise EmptyDataError(f"{path}: no data rows")
    return data


def _parse(path: Path, lineno: int, column: str, cell: str, kind: type):
    try:
        value = kind(cell)
    except ValueError as exc:
        raise SchemaError(
            f"{path}:{lineno}: column {column!r} has non-{kind.__name__} "
            f"value {cell!r}",
            column=column,
        ) from exc
    if kind is float and math.isnan(value) and column != "quantile_target":
        raise SchemaError(
            f"{path}:{lineno}: column {column!r} is NaN", column=column
        )
    return value


def read_losses(path) -> list[dict]:
    """Rows of a scalesim-losses-v1 file.

    Returns dicts with keys policy (str), alpha (float), seed (int),
    total_loss (float), mean_step_loss (float).
    """
    path = Path(path)
    kinds = (str, float, int, float, float)
    rows = []
    for lineno, cells in _open_checked(path, LOSSES_SCHEMA, LOSSES_COLUMNS):
        rows.append(
            {
                name: _parse(path, lineno, name, cell, kind)
                for name, cell, kind in zip(LOSSES_COLUMNS, cells, kinds)
            }
        )
    return rows


def read_plotdata(path) -> dict[str, list]:
    """Columns of a scalesim-plotdata-v1 file.

    Returns {"t": [int], "demand": [float], "quantile_target": [float],
    "live_hosts": [int]}; quantile_target is NaN on unscored warmup steps.
    """
    path = Path(path)
    kinds = (int, float, float, int)
    out: dict[str, list] = {name: [] for name in PLOTDATA_COLUMNS}
    for lineno, cells in _open_checked(path, PLOTDATA_SCHEMA, PLOTDATA_COLUMNS):
        for name, cell, kind in zip(PLOTDATA_COLUMNS, cells, kinds):
            out[name].append(_parse(path, lineno, name, cell, kind))
    return out
