"""Dataset file handling.

A dataset is a CSV with a leading integer ``time`` column, one numeric
column per series, and a header row carrying the series names. Times must
be strictly increasing and no cell may be missing; post-intervention
"missingness" of experimental series is structural and handled by the
engine, never by the file format.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from ._linalg import frozen_array
from .errors import DataError

__all__ = [
    "Panel",
    "load_dataset",
    "write_panel",
    "load_unit_panel",
    "write_unit_panel",
    "write_labels",
    "write_csv",
    "write_json",
    "fmt_float",
]


def fmt_float(x: float) -> str:
    """Full-precision decimal text (17 significant digits)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Panel:
    """In-memory dataset: integer times, series names, and a T-by-q value
    matrix (natural-logged when loaded with ``log_scale``)."""

    times: np.ndarray
    names: tuple
    values: np.ndarray
    log_scale: bool = False

    @property
    def n_times(self) -> int:
        return self.values.shape[0]

    @property
    def n_series(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"series {name!r} not present in dataset") from None

    def reordered(self, names) -> "Panel":
        """Panel with columns rearranged to the given name order."""
        idx = [self.index_of(name) for name in names]
        return Panel(times=self.times, names=tuple(names),
                     values=frozen_array(self.values[:, idx]), log_scale=self.log_scale)


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_dataset(path, log_scale: bool = False) -> Panel:
    """Load and validate a dataset file; optionally log-transform values."""
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0].lower() != "time":
        raise DataError(f"{path}: header must be 'time,<series>,...', got {header}")
    names = tuple(header[1:])
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate series names in header")
    if any(not name for name in names):
        raise DataError(f"{path}: empty series name in header")
    times = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
            )
        cells = [cell.strip() for cell in row]
        if any(cell == "" for cell in cells):
            raise DataError(f"{path}: line {lineno}: missing cell")
        try:
            times.append(int(cells[0]))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: time {cells[0]!r} is not an integer") from None
        try:
            parsed = [float(cell) for cell in cells[1:]]
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric value") from None
        if not all(np.isfinite(parsed)):
            raise DataError(f"{path}: line {lineno}: non-finite value")
        values.append(parsed)
    if not values:
        raise DataError(f"{path}: no data rows")
    times_arr = np.asarray(times, dtype=int)
    if np.any(np.diff(times_arr) <= 0):
        raise DataError(f"{path}: time column must be strictly increasing")
    values_arr = np.asarray(values, dtype=float)
    if log_scale:
        if np.any(values_arr <= 0):
            bad = int(np.argwhere(values_arr <= 0)[0][0]) + 2
            raise DataError(f"{path}: line {bad}: non-positive value under log_scale")
        values_arr = np.log(values_arr)
    return Panel(times=frozen_array(times_arr, dtype=int), names=names,
                 values=frozen_array(values_arr), log_scale=log_scale)


def write_csv(path, header, rows) -> None:
    """Write a CSV with floats at full precision; deterministic bytes."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                fmt_float(cell) if isinstance(cell, (float, np.floating)) else cell
                for cell in row
            ])


def write_panel(path, times, names, values) -> None:
    """Write a dataset file in the layout ``load_dataset`` expects."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    rows = ([int(t)] + [float(v) for v in row] for t, row in zip(times, values))
    write_csv(path, ["time", *names], rows)


def load_unit_panel(path):
    """Load a units-by-time panel: header ``unit,<t1>,...``, one row per unit.

    Returns ``(units, values)`` with ``values`` of shape (n_units, n_times).
    """
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0].lower() != "unit":
        raise DataError(f"{path}: header must be 'unit,<t1>,...', got {header}")
    units = []
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
            )
        cells = [cell.strip() for cell in row]
        if any(cell == "" for cell in cells):
            raise DataError(f"{path}: line {lineno}: missing cell")
        units.append(cells[0])
        try:
            values.append([float(cell) for cell in cells[1:]])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric value") from None
    if len(set(units)) != len(units):
        raise DataError(f"{path}: duplicate unit identifiers")
    return units, np.asarray(values, dtype=float)


def write_unit_panel(path, units, values) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    header = ["unit"] + [f"t{j + 1}" for j in range(values.shape[1])]
    rows = ([unit] + [float(v) for v in row] for unit, row in zip(units, values))
    write_csv(path, header, rows)


def write_labels(path, units, labels) -> None:
    write_csv(path, ["unit", "label"], ([u, str(l)] for u, l in zip(units, labels)))


def write_json(path, payload) -> None:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")
