"""CSV input and output for predictor panels and covariates.

File conventions
----------------
Panels are stored one period per row: a required header row of column
names, an optional leading time-label column (recognized by the header
names "t", "time", "date", or "period" in any case, or by non-numeric
cells), one column per predictor series, and one target column selected
by name.  Values use '.' as the decimal separator with no thousands
separators.  Empty and non-finite cells count as missing and are
rejected with their row numbers (1-based, header excluded).

Covariate files hold one row per predictor series with the same header
and label-column conventions.
"""

from __future__ import annotations

import csv

import numpy as np

from .exceptions import DataQualityError
from .panel import DataPanel

__all__ = ["load_panel_csv", "save_panel_csv", "load_covariates_csv"]

_LABEL_NAMES = {"t", "time", "date", "period"}


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError:
        raise DataQualityError(f"input file not found: {path}") from None
    except OSError as err:
        raise DataQualityError(f"cannot read {path}: {err}") from None
    rows = [row for row in rows if row]  # ignore fully blank lines
    if len(rows) < 2:
        raise DataQualityError(f"{path} needs a header row and at least one data row")
    header = [cell.strip() for cell in rows[0]]
    data = rows[1:]
    width = len(header)
    ragged = [i + 1 for i, row in enumerate(data) if len(row) != width]
    if ragged:
        raise DataQualityError(
            f"{path} is not rectangular: rows {_fmt_rows(ragged)} do not have "
            f"{width} cells (row numbers exclude the header)"
        )
    return header, [[cell.strip() for cell in row] for row in data]


def _fmt_rows(rows, limit=8):
    shown = ", ".join(str(r) for r in rows[:limit])
    return shown + (", ..." if len(rows) > limit else "")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _has_label_column(header, data) -> bool:
    if not header:
        return False
    if header[0].lower() in _LABEL_NAMES:
        return True
    return any(cell != "" and not _is_number(cell) for row in data for cell in row[:1])


def _parse_columns(path, header, data, columns):
    """Parse the named columns to a (rows, cols) float array, rejecting
    missing (empty or non-finite) and non-numeric cells with row numbers."""
    index = {name: header.index(name) for name in columns}
    out = np.empty((len(data), len(columns)))
    missing = []
    for r, row in enumerate(data):
        row_missing = False
        for c, name in enumerate(columns):
            cell = row[index[name]]
            if cell == "":
                row_missing = True
                continue
            try:
                value = float(cell)
            except ValueError:
                raise DataQualityError(
                    f"{path}: non-numeric value {cell!r} in column {name!r}, "
                    f"row {r + 1} (row numbers exclude the header)"
                ) from None
            if not np.isfinite(value):
                row_missing = True
                continue
            out[r, c] = value
        if row_missing:
            missing.append(r + 1)
    if missing:
        raise DataQualityError(
            f"{path}: missing values in rows {_fmt_rows(missing)} "
            "(row numbers exclude the header)"
        )
    return out


def load_panel_csv(path, target: str = "y", min_periods: int = 0):
    """Load a predictor panel and its target from a CSV file.

    Parameters
    ----------
    path : str
        CSV file, one period per row; see the module docstring for the
        format.
    target : str
        Header name of the target column.
    min_periods : int
        Reject files with fewer data rows than this.  The library accepts
        any panel of 2+ periods; the command-line front end passes 20,
        the minimum the forecasting pipeline needs.

    Returns
    -------
    (DataPanel, labels)
        The panel (predictors p x T, series names attached) and the time
        labels as a tuple of strings, or None when the file has no label
        column.

    Raises
    ------
    DataQualityError
        On unreadable files, ragged rows, a missing target column, fewer
        than 2 columns, missing or non-numeric cells, or fewer than
        ``min_periods`` periods.
    """
    header, data = _read_rows(path)
    start = 1 if _has_label_column(header, data) else 0
    labels = tuple(row[0] for row in data) if start else None
    value_names = header[start:]
    if target not in value_names:
        raise DataQualityError(
            f"{path} has no column named {target!r}; available: "
            + ", ".join(value_names)
        )
    series_names = [n for n in value_names if n != target]
    if not series_names:
        raise DataQualityError(f"{path} has no predictor columns besides {target!r}")
    values = _parse_columns(path, header, data, series_names + [target])
    if len(data) < min_periods:
        raise DataQualityError(
            f"{path} has {len(data)} periods; at least {min_periods} are required"
        )
    panel = DataPanel(
        predictors=values[:, :-1].T,
        target=values[:, -1],
        names=tuple(series_names),
    )
    return panel, labels


def save_panel_csv(path, panel: DataPanel, labels=None, target_name: str = "y"):
    """Write a panel to CSV in the format ``load_panel_csv`` reads.

    Values are written with 17 significant digits, so a load round-trip
    reproduces every float bit for bit.  ``labels`` defaults to the period
    positions 0..T-1.
    """
    T = panel.num_periods
    if labels is None:
        labels = [str(t) for t in range(T)]
    elif len(labels) != T:
        raise DataQualityError(f"{len(labels)} labels for {T} periods")
    names = list(panel.names) or [f"x{i + 1}" for i in range(panel.num_series)]
    if len(names) != panel.num_series:
        raise DataQualityError(
            f"{len(names)} series names for {panel.num_series} series"
        )
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", *names, target_name])
        for t in range(T):
            row = [labels[t]]
            row.extend(format(v, ".17g") for v in panel.predictors[:, t])
            row.append(format(panel.target[t], ".17g"))
            writer.writerow(row)


def load_covariates_csv(path):
    """Load per-series covariates: one row per predictor series.

    Returns a vector of length p for a single covariate column, else a
    p x d matrix.  Format rules match ``load_panel_csv`` (header required,
    optional leading label column, no missing cells).
    """
    header, data = _read_rows(path)
    start = 1 if _has_label_column(header, data) else 0
    names = header[start:]
    if not names:
        raise DataQualityError(f"{path} has no covariate columns")
    values = _parse_columns(path, header, data, names)
    return values[:, 0] if values.shape[1] == 1 else values
