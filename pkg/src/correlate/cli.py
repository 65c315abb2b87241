"""``correlate`` command line.

Exit codes: 0 success, 1 data or domain error (one-line diagnostic on
stderr), 2 usage error (argparse usage text on stderr).
"""
from __future__ import annotations

import argparse
import os
import re
import sys

from . import __version__
from .errors import CorrelateError
from .index import DEFAULT_D, DEFAULT_OVERSAMPLE, CorpusIndex, build_index, search_approx, search_exact
from .ingest import emit_plot_data, parse_corpus_csv, parse_surveillance_csv
from .report import (
    figure2_report,
    read_rows,
    render_docs,
    round_half_away,
    rows_csv,
    select_strong,
    table1_report,
    table2_report,
    write_text,
)
from .stats import DEFAULT_SHIFTS, DEFAULT_YEARS, lag_scan, yearly_scan

STORE_ENV = "CORRELATE_STORE"


_RANGE = re.compile(r"^(-?\d+)\.\.(-?\d+)$")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        m = _RANGE.match(part)
        try:
            out.extend(range(int(m.group(1)), int(m.group(2)) + 1) if m else [int(part)])
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"expected comma-separated integers or a..b ranges, got {text!r}"
            ) from None
    return out


def _years(text: str) -> list[int]:
    if "-" in text[1:] and "," not in text and ".." not in text:
        lo, hi = text.split("-", 1)
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            pass
    return _int_list(text)


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="correlate", description="Weekly time-series correlation search.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def store_arg(sp):
        sp.add_argument("--store", default=os.environ.get(STORE_ENV),
                        help=f"index directory (default: ${STORE_ENV})")

    def target_arg(sp):
        sp.add_argument("--target", required=True, help="surveillance CSV (country,week_start,positive)")
        sp.add_argument("--snap", action="store_true", help="round off-grid dates to the nearest week")

    def output_args(sp):
        sp.add_argument("--format", choices=("text", "csv"), default="text")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")

    sp = sub.add_parser("ingest", help="parse a corpus CSV and build an index directory")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--country", required=True)
    store_arg(sp)
    sp.add_argument("--signed", action="store_true", help="accept negative (already normalized) values")
    sp.add_argument("--snap", action="store_true")
    sp.add_argument("--d", type=_positive, default=DEFAULT_D, help="sketch width")
    sp.add_argument("--seed", type=int, default=0, help="projection seed")

    sp = sub.add_parser("search", help="top-k queries most correlated with a target")
    target_arg(sp)
    store_arg(sp)
    sp.add_argument("--top", type=_positive, default=20)
    sp.add_argument("--exact", action="store_true", help="exhaustive scan instead of sketch pruning")
    sp.add_argument("--oversample", type=_positive, default=DEFAULT_OVERSAMPLE)
    sp.add_argument("--strong", action="store_true", help="keep only r >= 0.70, p < 0.05")
    sp.add_argument("--workers", type=_positive, default=1, help="threads for the exhaustive scan")

    sp = sub.add_parser("lagscan", help="lag grid (shift sweep) for selected queries")
    target_arg(sp)
    store_arg(sp)
    sp.add_argument("--query", action="append", default=None, help="exact query name (repeatable; default all)")
    sp.add_argument("--shifts", type=_int_list, default=list(DEFAULT_SHIFTS),
                    help="e.g. --shifts=-1,0,1,2 (positive = query leads)")
    sp.add_argument("--strong", action="store_true", help="keep only queries strong at zero shift")
    sp.add_argument("--rows-out", default=None, help="also write full-precision row file here")
    output_args(sp)

    sp = sub.add_parser("yearly", help="per-calendar-year correlations for selected queries")
    target_arg(sp)
    store_arg(sp)
    sp.add_argument("--query", action="append", default=None)
    sp.add_argument("--years", type=_years, default=list(DEFAULT_YEARS), help="e.g. 2009-2013 or 2009,2011")
    sp.add_argument("--rows-out", default=None)
    output_args(sp)

    sp = sub.add_parser("report", help="render table1/table2/figure2 from row files")
    sp.add_argument("kind", choices=("table1", "table2", "figure2"))
    sp.add_argument("--rows", action="append", required=True, help="row file (repeatable)")
    sp.add_argument("--years", type=_years, default=None, help="table2 year columns")
    output_args(sp)

    sp = sub.add_parser("plotdata", help="write week_start,value CSV for a surveillance series")
    target_arg(sp)
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("selftest", help="run the embedded invariant checks")
    sp.add_argument("--quick", action="store_true", help="smaller sample sizes")
    return p


def _p_text(p: float) -> str:
    return "NA" if p != p else f"{p:.2e}"


def _need_store(parser, args):
    if not args.store:
        parser.error(f"--store is required (or set ${STORE_ENV})")
    return args.store


def _load_target(args, index=None):
    table = parse_surveillance_csv(args.target, snap=args.snap)
    if index is not None and table.country and index.country and table.country != index.country:
        raise CorrelateError(f"target country {table.country} does not match store country {index.country}")
    return table


def _selected(index, names):
    if not names:
        return list(index.queries)
    for q in names:
        index.position(q)
    return names


def cmd_ingest(args, parser):
    store = _need_store(parser, args)
    table = parse_corpus_csv(args.corpus, args.country, signed=args.signed, snap=args.snap)
    index = build_index(table.records, d=args.d, seed=args.seed)
    index.save(store)
    grid = index.grid
    print(f"ingested {len(index)} queries, {grid.length} weeks "
          f"({grid.start_date.isoformat()} .. {grid.end_date.isoformat()}) into {store}")
    flat = len(index) - int(index.sketchable.sum())
    if flat:
        print(f"warning: {flat} constant or near-empty series stored but not sketched", file=sys.stderr)
    return 0


def cmd_search(args, parser):
    index = CorpusIndex.load(_need_store(parser, args))
    target = _load_target(args, index).series
    if args.exact:
        results = search_exact(index, target, args.top, workers=args.workers)
    else:
        results = search_approx(index, target, args.top, oversample=args.oversample)
    if len(results) < args.top:
        print(f"warning: only {len(results)} records have a defined correlation; listing truncated",
              file=sys.stderr)
    if args.strong:
        results, removed = select_strong(results)
        print(f"strong filter removed {removed} result(s)", file=sys.stderr)
    lines = [
        f"{res.rank}  {res.query}  {round_half_away(res.estimate.r, 2)}  "
        f"{_p_text(res.estimate.p)}  {res.estimate.n}"
        for res in results
    ]
    sys.stdout.write("".join(line + "\n" for line in lines))
    return 0


def cmd_lagscan(args, parser):
    index = CorpusIndex.load(_need_store(parser, args))
    target = _load_target(args, index).series
    rows = []
    for q in _selected(index, args.query):
        row = lag_scan(target, index.record(q).series, args.shifts, name=q)
        if args.strong:
            zero = row.estimates.get(0)
            if zero is None or not (zero.defined and zero.r >= 0.70 and zero.significant):
                continue
        rows.append(row)
    if args.rows_out:
        write_text(rows_csv({index.country: rows}, "lag"), args.rows_out)
    if not rows:
        raise CorrelateError("no query rows to report")
    write_text(table1_report(rows, index.country).render(args.format), args.out)
    return 0


def cmd_yearly(args, parser):
    index = CorpusIndex.load(_need_store(parser, args))
    target = _load_target(args, index).series
    rows = [
        yearly_scan(target, index.record(q).series, args.years, name=q)
        for q in _selected(index, args.query)
    ]
    if args.rows_out:
        write_text(rows_csv({index.country: rows}, "yearly"), args.rows_out)
    write_text(table2_report(rows, args.years, index.country).render(args.format), args.out)
    return 0


def cmd_report(args, parser):
    merged: dict = {}
    kinds = set()
    for path in args.rows:
        kind, grouped = read_rows(path)
        kinds.add(kind)
        for country, rows in grouped.items():
            merged.setdefault(country, []).extend(rows)
    want = "lag" if args.kind == "table1" else "yearly"
    if kinds != {want}:
        raise CorrelateError(f"{args.kind} needs {want} row files, got {', '.join(sorted(kinds))}")
    if args.kind == "table1":
        docs = [table1_report(rows, c) for c, rows in merged.items()]
    elif args.kind == "table2":
        docs = [table2_report(rows, args.years, c) for c, rows in merged.items()]
    else:
        docs = [figure2_report(merged)]
    write_text(render_docs(docs, args.format), args.out)
    return 0


def cmd_plotdata(args, parser):
    table = parse_surveillance_csv(args.target, snap=args.snap)
    if args.out:
        emit_plot_data(table.series, args.out)
    else:
        emit_plot_data(table.series, sys.stdout)
    return 0


def cmd_selftest(args, parser):
    from .selftest import run_all

    ok = True
    for name, passed, detail in run_all(quick=args.quick):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
    return 0 if ok else 1


COMMANDS = {
    "ingest": cmd_ingest,
    "search": cmd_search,
    "lagscan": cmd_lagscan,
    "yearly": cmd_yearly,
    "report": cmd_report,
    "plotdata": cmd_plotdata,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, parser)
    except (CorrelateError, ValueError, OSError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
