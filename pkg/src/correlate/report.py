"""Deterministic lag-grid, yearly-grid and yearly-average reports.

Numbers are rounded half away from zero only when rendered; stars are chosen
from full-precision values. Text output is column-aligned by display width
(East Asian wide characters count as two cells). CSV output carries the
footnotes as trailing ``#`` lines, except the yearly-average CSV, which is
plain ``country,year,mean_r``.

Row files (``lagscan``/``yearly`` output and the report inputs)::

    country,query,shift,r,n,p        # lag rows
    country,query,year,r,n,p         # yearly rows

An empty ``r`` is an NA estimate; an empty ``p`` is recomputed from r and n.
"""
from __future__ import annotations

import csv
import io
import math
import sys
import unicodedata
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ParseError
from .stats import (
    CorrelationEstimate,
    LagRow,
    YearlyRow,
    average_yearly,
    best_shift,
    best_year,
)

STRONG_R = 0.70
ALPHA = 0.05

SHIFT_NOTE = (
    "Shift convention: 'proceeding k' is shift +k (query series leads the target by k weeks); "
    "'lagging k' is shift -k (query series trails the target by k weeks)."
)
TEST_NOTE = (
    "Significance: two-sided t-test of r = 0 with t = r*sqrt((n-2)/(1-r^2)), df = n-2; "
    "significant means p < 0.05."
)
STRONG_NOTE = "Strong correlation: r >= 0.70 with p < 0.05 at zero shift."
NA_NOTE = (
    "NA: not applicable; the window has fewer than two paired weeks or no variation "
    "(e.g. no reported cases)."
)


def round_half_away(x: float, places: int = 2) -> str:
    q = Decimal(repr(float(x))).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP)
    if q.is_zero():
        q = abs(q)
    return f"{q:.{places}f}"


def format_r(est: Optional[CorrelationEstimate], places: int = 2) -> str:
    if est is None or not est.defined:
        return "NA"
    return round_half_away(est.r, places)


def shift_label(shift: int) -> str:
    if shift == 0:
        return "0w"
    if shift < 0:
        return f"lagging {-shift}w"
    return f"proceeding {shift}w"


def _width(text: str) -> int:
    return sum(2 if unicodedata.east_asian_width(ch) in "WF" else 1 for ch in text)


def _pad(text: str, width: int) -> str:
    return text + " " * (width - _width(text))


@dataclass(frozen=True)
class ReportDoc:
    kind: str
    country: str
    columns: list
    rows: list
    footnotes: list = field(default_factory=list)

    def to_text(self) -> str:
        table = [self.columns] + self.rows
        widths = [max(_width(r[i]) for r in table) for i in range(len(self.columns))]
        lines = [f"[{self.kind}] {self.country}".rstrip()]
        for r in table:
            lines.append("  ".join(_pad(c, w) for c, w in zip(r, widths)).rstrip())
        for note in self.footnotes:
            lines.append(note)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        return _csv_docs([self])

    def render(self, fmt: str = "text") -> str:
        if fmt == "text":
            return self.to_text()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown report format {fmt!r}")


def _csv_docs(docs: Sequence[ReportDoc]) -> str:
    """One CSV for several docs of the same kind: one header, footnotes once at the end."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    per_country = docs[0].kind != "yearly_average"
    w.writerow(["country"] + docs[0].columns if per_country else docs[0].columns)
    notes = []
    for doc in docs:
        for row in doc.rows:
            w.writerow([doc.country] + row if per_country else row)
        notes.extend(n for n in doc.footnotes if n not in notes)
    if per_country:
        for note in notes:
            buf.write(f"# {note}\n")
    return buf.getvalue()


def render_docs(docs: Sequence[ReportDoc], fmt: str = "text") -> str:
    if fmt == "csv":
        return _csv_docs(docs)
    return "\n".join(d.render(fmt) for d in docs)


def select_strong(results, r_min: float = STRONG_R, alpha: float = ALPHA):
    """Keep zero-shift results with r >= r_min and p < alpha.

    Returns ``(kept, removed_count)``; order is preserved.
    """
    kept = []
    for res in results:
        est = res.estimate
        if est.defined and est.shift == 0 and est.r >= r_min and not math.isnan(est.p) and est.p < alpha:
            kept.append(res)
    return kept, len(results) - len(kept)


def table1_report(rows: Sequence[LagRow], country: str, notes: Iterable[str] = ()) -> ReportDoc:
    shifts = sorted({s for row in rows for s in row.estimates})
    columns = ["query"] + [shift_label(s) for s in shifts]
    body = []
    for row in rows:
        star = best_shift(row.estimates)
        cells = [row.query]
        for s in shifts:
            text = format_r(row.estimates.get(s))
            cells.append(text + "*" if s == star else text)
        body.append(cells)
    footnotes = [
        "* highest r in the row (ties: smallest |shift|, then the lagging side), chosen before rounding.",
        SHIFT_NOTE,
        STRONG_NOTE,
        TEST_NOTE,
    ]
    if any("NA" in c for r in body for c in r[1:]):
        footnotes.append(NA_NOTE)
    footnotes.extend(notes)
    return ReportDoc("lag_grid", country, columns, body, footnotes)


def table2_report(rows: Sequence[YearlyRow], years: Optional[Sequence[int]] = None,
                  country: str = "", notes: Iterable[str] = ()) -> ReportDoc:
    if years is None:
        years = sorted({y for row in rows for y in row.by_year})
    years = list(years)
    columns = ["query"] + [str(y) for y in years]
    body = []
    for row in rows:
        sub = {y: row.by_year[y] for y in years if y in row.by_year}
        star = best_year(sub)
        cells = [row.query]
        for y in years:
            text = format_r(sub.get(y))
            cells.append(text + "*" if y == star else text)
        body.append(cells)
    footnotes = [
        "* highest yearly r in the row (ties: earliest year), chosen before rounding.",
        "Yearly windows hold the weeks whose start date falls in that calendar year; shift 0.",
        TEST_NOTE,
    ]
    if any(c == "NA" for r in body for c in r[1:]):
        footnotes.append(NA_NOTE)
    footnotes.extend(notes)
    return ReportDoc("yearly_grid", country, columns, body, footnotes)


def figure2_report(rows_by_country: Mapping[str, Sequence[YearlyRow]]) -> ReportDoc:
    if not rows_by_country:
        raise ValueError("figure2 needs at least one country")
    body = []
    for country in sorted(rows_by_country):
        for year, mean in average_yearly(rows_by_country[country]).items():
            body.append([country, str(year), round_half_away(mean, 3)])
    return ReportDoc(
        "yearly_average", "", ["country", "year", "mean_r"], body,
        ["mean_r: arithmetic mean of the defined yearly r values; years with no defined value are omitted."],
    )


# row files ----------------------------------------------------------------

LAG_ROWS_HEADER = ["country", "query", "shift", "r", "n", "p"]
YEARLY_ROWS_HEADER = ["country", "query", "year", "r", "n", "p"]


def _num(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def rows_csv(rows_by_country: Mapping[str, Sequence], kind: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "lag":
        w.writerow(LAG_ROWS_HEADER)
        for country, rows in rows_by_country.items():
            for row in rows:
                for s, e in row.estimates.items():
                    w.writerow([country, row.query, s, _num(e.r), e.n, _num(e.p)])
    elif kind == "yearly":
        w.writerow(YEARLY_ROWS_HEADER)
        for country, rows in rows_by_country.items():
            for row in rows:
                for y, e in row.by_year.items():
                    w.writerow([country, row.query, y, _num(e.r), e.n, _num(e.p)])
    else:
        raise ValueError(kind)
    return buf.getvalue()


def read_rows(path) -> tuple[str, dict]:
    """Parse a lag or yearly row file; returns ``(kind, {country: [rows]})``."""
    try:
        with open(path, "r", encoding="utf-8-sig", newline="") as fh:
            table = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}", path) from None
    if not table:
        raise ParseError("empty row file", path, 1)
    header = table[0]
    if header == LAG_ROWS_HEADER:
        kind = "lag"
    elif header == YEARLY_ROWS_HEADER:
        kind = "yearly"
    else:
        raise ParseError(f"unrecognised row-file header {','.join(header)}", path, 1)
    grouped: dict = {}
    for row_no, row in enumerate(table[1:], start=2):
        if len(row) != 6:
            raise ParseError(f"expected 6 fields, got {len(row)}", path, row_no)
        country, query, key, r, n, p = row
        try:
            key_i, n_i = int(key), int(n)
            r_f = float(r) if r.strip() else math.nan
            p_f = float(p) if p.strip() else None
        except ValueError:
            raise ParseError("malformed number", path, row_no) from None
        if math.isnan(r_f):
            est = CorrelationEstimate.na(n_i, key_i if kind == "lag" else 0)
        elif p_f is None:
            est = CorrelationEstimate.from_r(r_f, n_i, key_i if kind == "lag" else 0)
        else:
            est = CorrelationEstimate(r_f, n_i, p_f, key_i if kind == "lag" else 0, True)
        per_query = grouped.setdefault(country, {}).setdefault(query, {})
        if key_i in per_query:
            raise ParseError(f"duplicate {'shift' if kind == 'lag' else 'year'} {key_i} for {query!r}", path, row_no)
        per_query[key_i] = est
    cls = LagRow if kind == "lag" else YearlyRow
    return kind, {c: [cls(q, ests) for q, ests in qs.items()] for c, qs in grouped.items()}


def write_text(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
