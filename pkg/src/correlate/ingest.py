"""CSV ingestion onto the week grid, and plot-ready series output.

Surveillance files::

    country,week_start,positive
    CN,2004-01-04,0

Corpus files (search-volume export, one column per query)::

    date,h1n1,swine flu
    2004-01-04,0.12,0.4

Both accept ``\\n`` or ``\\r\\n`` line endings; output always uses ``\\n``.
Dates must be ISO ``yyyy-mm-dd`` and sit on the weekly lattice of the first
row unless ``snap=True``. Query headers are kept byte-exact.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import OffGridDateError, ParseError
from .index import QueryRecord
from .series import TimeSeries, WeekGrid

SURVEILLANCE_HEADER = ["country", "week_start", "positive"]
PLOT_HEADER = ["week_start", "value"]


@dataclass(frozen=True)
class SurveillanceTable:
    country: str
    series: TimeSeries


@dataclass(frozen=True)
class CorpusTable:
    country: str
    records: list

    @property
    def grid(self) -> WeekGrid:
        return self.records[0].series.grid


def _read_rows(path):
    try:
        with open(path, "r", encoding="utf-8-sig", newline="") as fh:
            return list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", path) from None


def _parse_date(text, path, row):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"malformed date {text!r} (expected yyyy-mm-dd)", path, row) from None


def _parse_number(text, path, row, what, signed=False):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"malformed {what} {text!r}", path, row) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite {what} {text!r}", path, row)
    if v < 0 and not signed:
        raise ParseError(f"negative {what} {text!r}", path, row)
    return v


def _lay_out(dated, path, snap):
    """Place (row_number, date, payload) triples on a grid anchored at the first date."""
    anchor = WeekGrid(dated[0][1], 1)
    offsets = []
    for row_no, date, _ in dated:
        try:
            off = anchor.offset_of(date, snap=snap)
        except OffGridDateError as exc:
            raise ParseError(str(exc), path, row_no) from None
        if offsets and off <= offsets[-1]:
            kind = "duplicate week" if off == offsets[-1] else "week out of order"
            raise ParseError(f"{kind} {date.isoformat()}", path, row_no)
        if off < 0:
            raise ParseError(f"week {date.isoformat()} precedes the first row", path, row_no)
        offsets.append(off)
    return WeekGrid(dated[0][1], offsets[-1] + 1), offsets


def parse_surveillance_csv(path, snap: bool = False, country: Optional[str] = None) -> SurveillanceTable:
    """Read a surveillance file (or a plot-data file, given ``country``)."""
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty file", path, 1)
    header = [h.strip() for h in rows[0]]
    plot_format = header == PLOT_HEADER
    if not plot_format and header != SURVEILLANCE_HEADER:
        raise ParseError(f"expected header {','.join(SURVEILLANCE_HEADER)}, got {','.join(rows[0])}", path, 1)
    dated = []
    countries = set()
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, row_no)
        if plot_format:
            code, week, cell = country or "", row[0], row[1]
        else:
            code, week, cell = row[0].strip(), row[1], row[2]
            countries.add(code)
            if len(countries) > 1:
                raise ParseError(f"multiple countries in one file: {', '.join(sorted(countries))}", path, row_no)
        date = _parse_date(week, path, row_no)
        value = None
        if cell.strip():
            value = _parse_number(cell, path, row_no, "count")
            if not value.is_integer():
                raise ParseError(f"count {cell!r} is not an integer", path, row_no)
        dated.append((row_no, date, value))
    if not dated:
        raise ParseError("no data rows", path, len(rows))
    grid, offsets = _lay_out(dated, path, snap)
    values = np.full(grid.length, np.nan)
    for off, (_, _, v) in zip(offsets, dated):
        if v is not None:
            values[off] = v
    code = countries.pop() if countries else (country or "")
    return SurveillanceTable(code, TimeSeries(grid, values))


def parse_corpus_csv(path, country: str, signed: bool = False, snap: bool = False) -> CorpusTable:
    rows = _read_rows(path)
    if not rows:
        raise ParseError("empty file", path, 1)
    header = rows[0]
    if not header or header[0].strip() != "date":
        raise ParseError("first column must be 'date'", path, 1)
    queries = header[1:]
    if not queries:
        raise ParseError("no query columns", path, 1)
    seen = set()
    for q in queries:
        if not q:
            raise ParseError("empty query column header", path, 1)
        if q in seen:
            raise ParseError(f"duplicate query column {q!r}", path, 1)
        seen.add(q)
    dated = []
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"ragged row: expected {len(header)} fields, got {len(row)}", path, row_no)
        date = _parse_date(row[0], path, row_no)
        cells = [
            _parse_number(c, path, row_no, "value", signed=signed) if c.strip() else math.nan
            for c in row[1:]
        ]
        dated.append((row_no, date, cells))
    if not dated:
        raise ParseError("no data rows", path, len(rows))
    grid, offsets = _lay_out(dated, path, snap)
    mat = np.full((len(queries), grid.length), np.nan)
    for off, (_, _, cells) in zip(offsets, dated):
        mat[:, off] = cells
    records = [
        QueryRecord(q, country, TimeSeries(grid, mat[j], signed=signed))
        for j, q in enumerate(queries)
    ]
    return CorpusTable(country, records)


def format_value(v: float) -> str:
    """Shortest exact text: integers without a decimal point, otherwise repr."""
    if math.isnan(v):
        return ""
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def plot_data_text(series: TimeSeries) -> str:
    if series.grid.length == 0 or not series.present.any():
        raise ValueError("cannot emit plot data for an empty series")
    buf = io.StringIO()
    buf.write(",".join(PLOT_HEADER) + "\n")
    for date, v in zip(series.grid.dates(), series.values):
        buf.write(f"{date.isoformat()},{format_value(v)}\n")
    return buf.getvalue()


def emit_plot_data(series: TimeSeries, out) -> None:
    """Write ``week_start,value`` CSV (gaps as empty cells) to a path or text stream."""
    text = plot_data_text(series)
    if hasattr(out, "write"):
        out.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def write_surveillance_csv(table: SurveillanceTable, out) -> None:
    lines = [",".join(SURVEILLANCE_HEADER)]
    for date, v in zip(table.series.grid.dates(), table.series.values):
        lines.append(f"{table.country},{date.isoformat()},{format_value(v)}")
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_corpus_csv(records, out) -> None:
    grid = records[0].series.grid
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date"] + [r.query for r in records])
    cols = [r.series.values for r in records]
    for i, date in enumerate(grid.dates()):
        w.writerow([date.isoformat()] + [format_value(c[i]) for c in cols])
    Path(out).write_text(buf.getvalue(), encoding="utf-8", newline="\n")
