"""Deterministic plain-text run reports with CSV table sidecars.

Schema
------
A report is UTF-8 text with three kinds of sections, each introduced by a
bracketed header line and separated by single blank lines::

    suffcast report 1

    [config]
    key = value

    [summary]
    key = value

    [table:<name>]
    col_a,col_b
    1,2.5

Key-value lines use `` = `` as the separator; keys are identifiers and
values never contain newlines.  Table bodies are CSV-encoded with a header
row.  Floats are written with 10 significant digits, '.' decimal; reports
carry no timestamps or environment details, so the same inputs produce
byte-identical output.  ``write_report`` additionally saves each table as
``<out-stem>_<table>.csv`` beside the report for direct plotting.
"""

from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass, field

from .exceptions import ConfigError

__all__ = ["Report", "render_report", "write_report", "parse_report"]

_MAGIC = "suffcast report 1"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".10g")
    if value is None:
        return "none"
    text = str(value)
    if "\n" in text:
        raise ConfigError("report values must be single-line")
    return text


@dataclass
class Report:
    """An ordered collection of config echo, scalar results, and tables."""

    config: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # name -> (headers, rows)

    def add_table(self, name: str, headers, rows):
        if not name.replace("_", "").isalnum():
            raise ConfigError(f"table name {name!r} must be alphanumeric/underscore")
        headers = [str(h) for h in headers]
        rows = [[_fmt(cell) for cell in row] for row in rows]
        for i, row in enumerate(rows):
            if len(row) != len(headers):
                raise ConfigError(
                    f"table {name!r} row {i} has {len(row)} cells for "
                    f"{len(headers)} columns"
                )
        self.tables[name] = (headers, rows)


def _csv_lines(headers, rows) -> str:
    buffer = _io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buffer.getvalue()


def render_report(report: Report) -> str:
    """Render a report to its text form (see the module docstring)."""
    parts = [_MAGIC + "\n"]
    for section, mapping in (("config", report.config), ("summary", report.summary)):
        lines = [f"[{section}]"]
        lines.extend(f"{key} = {_fmt(value)}" for key, value in mapping.items())
        parts.append("\n".join(lines) + "\n")
    for name, (headers, rows) in report.tables.items():
        parts.append(f"[table:{name}]\n" + _csv_lines(headers, rows))
    return "\n".join(parts)


def write_report(report: Report, out_path: str) -> list:
    """Write the text report plus one CSV sidecar per table.

    The sidecars are named ``<out-stem>_<table>.csv`` and live beside the
    report file.  Returns the list of paths written, report first.
    """
    text = render_report(report)
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    written = [out_path]
    stem, _ = os.path.splitext(out_path)
    for name, (headers, rows) in report.tables.items():
        side = f"{stem}_{name}.csv"
        with open(side, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(headers)
            writer.writerows(rows)
        written.append(side)
    return written


def parse_report(text: str) -> Report:
    """Parse report text back into a Report of strings.

    Used for schema checks and tests; values come back as the literal
    strings that were rendered.
    """
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ConfigError("not a recognized report: bad first line")
    report = Report()
    section = None  # ("kv", dict) or ("table", name, headers, rows)
    for lineno, line in enumerate(lines[1:], start=2):
        if line == "":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header")
            name = line[1:-1]
            if name in ("config", "summary"):
                section = ("kv", getattr(report, name))
            elif name.startswith("table:"):
                table_name = name[len("table:"):]
                report.tables[table_name] = ([], [])
                section = ("table", table_name)
            else:
                raise ConfigError(f"line {lineno}: unknown section {name!r}")
            continue
        if section is None:
            raise ConfigError(f"line {lineno}: content outside any section")
        if section[0] == "kv":
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            section[1][key] = value
        else:
            (cells,) = csv.reader([line])
            headers, rows = report.tables[section[1]]
            if not headers:
                headers.extend(cells)
            else:
                if len(cells) != len(headers):
                    raise ConfigError(
                        f"line {lineno}: {len(cells)} cells for "
                        f"{len(headers)} columns"
                    )
                rows.append(cells)
    return report
