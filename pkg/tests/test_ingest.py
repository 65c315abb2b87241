import datetime as dt
import io

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from correlate.errors import ParseError
from correlate.ingest import (
    SurveillanceTable,
    emit_plot_data,
    parse_corpus_csv,
    parse_surveillance_csv,
    plot_data_text,
    write_corpus_csv,
    write_surveillance_csv,
)
from correlate.series import from_values, make_week_grid


def write(tmp_path, text, name="in.csv", newline="\n"):
    p = tmp_path / name
    p.write_bytes(text.replace("\n", newline).encode("utf-8"))
    return p


# surveillance ---------------------------------------------------------

def test_minimal_surveillance(tmp_path):
    p = write(tmp_path, "country,week_start,positive\nCN,2004-01-04,0\nCN,2004-01-11,3\n")
    table = parse_surveillance_csv(p)
    assert table.country == "CN"
    assert table.series.grid == make_week_grid("2004-01-04", 2)
    assert table.series.to_list() == [0.0, 3.0]


def test_crlf_and_bom_accepted(tmp_path):
    p = tmp_path / "crlf.csv"
    p.write_bytes("\ufeffcountry,week_start,positive\r\nCN,2004-01-04,0\r\nCN,2004-01-11,3\r\n".encode("utf-8"))
    assert parse_surveillance_csv(p).series.to_list() == [0.0, 3.0]


def test_off_grid_date(tmp_path):
    p = write(tmp_path, "country,week_start,positive\nCN,2004-01-04,0\nCN,2004-01-06,3\n")
    with pytest.raises(ParseError, match="off-grid date") as exc:
        parse_surveillance_csv(p)
    assert ":3:" in str(exc.value)


def test_snap_rounds_to_nearest_week(tmp_path):
    p = write(tmp_path, "country,week_start,positive\nCN,2004-01-04,0\nCN,2004-01-12,3\n")
    assert parse_surveillance_csv(p, snap=True).series.to_list() == [0.0, 3.0]


def test_missing_week_is_gap(tmp_path):
    p = write(tmp_path, "country,week_start,positive\nCN,2004-01-04,1\nCN,2004-01-18,2\n")
    s = parse_surveillance_csv(p).series
    assert s.grid.length == 3
    assert s.to_list() == [1.0, None, 2.0]


@pytest.mark.parametrize("body, message", [
    ("CN,2004/01/04,0\n", "malformed date"),
    ("CN,2004-01-04,-1\n", "negative count"),
    ("CN,2004-01-04,1.5\n", "not an integer"),
    ("CN,2004-01-04,x\n", "malformed count"),
    ("CN,2004-01-04,1\nCN,2004-01-04,2\n", "duplicate week"),
    ("CN,2004-01-11,1\nCN,2004-01-04,2\n", "out of order"),
    ("CN,2004-01-04,1\nMY,2004-01-11,2\n", "multiple countries"),
    ("CN,2004-01-04\n", "expected 3 fields"),
    ("", "no data rows"),
])
def test_surveillance_errors(tmp_path, body, message):
    p = write(tmp_path, "country,week_start,positive\n" + body)
    with pytest.raises(ParseError, match=message):
        parse_surveillance_csv(p)


def test_bad_header_and_empty_file(tmp_path):
    with pytest.raises(ParseError, match="expected header"):
        parse_surveillance_csv(write(tmp_path, "country,date,count\nCN,2004-01-04,1\n"))
    with pytest.raises(ParseError, match="empty file"):
        parse_surveillance_csv(write(tmp_path, "", name="e.csv"))


def test_invalid_utf8(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(b"country,week_start,positive\nC\xff,2004-01-04,1\n")
    with pytest.raises(ParseError, match="UTF-8"):
        parse_surveillance_csv(p)


# corpus ---------------------------------------------------------------

def test_minimal_corpus(tmp_path):
    p = write(tmp_path, "date,a,b\n2004-01-04,1,2\n2004-01-11,3,4\n2004-01-18,5,6\n")
    table = parse_corpus_csv(p, "CN")
    assert [r.query for r in table.records] == ["a", "b"]
    assert all(r.series.grid.length == 3 for r in table.records)
    assert table.records[1].series.to_list() == [2.0, 4.0, 6.0]
    assert table.grid == make_week_grid("2004-01-04", 3)


def test_corpus_per_cell_gaps(tmp_path):
    p = write(tmp_path, "date,A,B\n2004-01-04,1,2\n2004-01-11,,4\n2004-01-18,5,6\n")
    a, b = parse_corpus_csv(p, "CN").records
    assert a.series.to_list() == [1.0, None, 5.0]
    assert b.series.to_list() == [2.0, 4.0, 6.0]


@pytest.mark.parametrize("text, message", [
    ("date,h1n1,h1n1\n2004-01-04,1,2\n", "duplicate query column"),
    ("date,a,b\n2004-01-04,1\n", "ragged row"),
    ("date,a\n2004-01-04,1\n2004-01-09,2\n", "off-grid date"),
    ("date,a\n2004-01-04,-0.5\n", "negative value"),
    ("date,a\n2004-01-04,inf\n", "non-finite"),
    ("week,a\n2004-01-04,1\n", "first column must be 'date'"),
    ("date\n2004-01-04\n", "no query columns"),
    ("date,a,\n2004-01-04,1,2\n", "empty query column"),
])
def test_corpus_errors(tmp_path, text, message):
    with pytest.raises(ParseError, match=message):
        parse_corpus_csv(write(tmp_path, text), "CN")


def test_signed_corpus(tmp_path):
    p = write(tmp_path, "date,z\n2004-01-04,-1.25\n2004-01-11,1.25\n")
    assert parse_corpus_csv(p, "CN", signed=True).records[0].series.to_list() == [-1.25, 1.25]


def test_spacing_variants_are_distinct_and_exact(tmp_path):
    names = ["AH1N1", "A H1N1", "莲花清瘟胶囊", "流感症状 "]
    p = write(tmp_path, "date," + ",".join(names) + "\n2004-01-04,1,2,3,4\n")
    assert [r.query for r in parse_corpus_csv(p, "CN").records] == names


def test_corpus_roundtrip(tmp_path):
    p = write(tmp_path, 'date,"a,b",莲花\n2004-01-04,0.125,\n2004-01-11,3,1e-05\n')
    table = parse_corpus_csv(p, "CN")
    write_corpus_csv(table.records, tmp_path / "out.csv")
    back = parse_corpus_csv(tmp_path / "out.csv", "CN")
    assert [r.query for r in back.records] == ["a,b", "莲花"]
    assert [r.series for r in back.records] == [r.series for r in table.records]


# plot data ------------------------------------------------------------

def test_plot_data_gap_cell():
    text = plot_data_text(from_values("2004-01-04", [0, 3, None]))
    assert text == "week_start,value\n2004-01-04,0\n2004-01-11,3\n2004-01-18,\n"


def test_plot_data_empty_series():
    with pytest.raises(ValueError):
        plot_data_text(from_values("2004-01-04", [None, None]))


def test_plot_data_parses_back(tmp_path):
    s = from_values("2009-03-01", [4, None, 0, 17])
    emit_plot_data(s, tmp_path / "plot.csv")
    assert parse_surveillance_csv(tmp_path / "plot.csv", country="PH").series == s
    buf = io.StringIO()
    emit_plot_data(s, buf)
    assert buf.getvalue() == (tmp_path / "plot.csv").read_text(encoding="utf-8")


# round trip -----------------------------------------------------------

counts = st.one_of(st.none(), st.integers(0, 10**6))


@st.composite
def surveillance_tables(draw):
    n = draw(st.integers(1, 60))
    start = draw(st.dates(min_value=dt.date(1990, 1, 1), max_value=dt.date(2030, 12, 31)))
    values = draw(st.lists(counts, min_size=n, max_size=n))
    values[0] = draw(st.integers(0, 10**6))
    return SurveillanceTable(draw(st.sampled_from(["CN", "IN", "MY", "PH", "TH"])),
                             from_values(start, values))


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(surveillance_tables())
def test_parse_emit_parse_identity(tmp_path, table):
    write_surveillance_csv(table, tmp_path / "a.csv")
    first = parse_surveillance_csv(tmp_path / "a.csv")
    assert first == table
    emit_plot_data(first.series, tmp_path / "b.csv")
    second = parse_surveillance_csv(tmp_path / "b.csv", country=table.country)
    assert second == table
    write_surveillance_csv(second, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_bytes() == (tmp_path / "a.csv").read_bytes()
