"""Weekly calendar grid, gap-aware series container, alignment and yearly windows.

Shift convention used throughout the package: ``align(target, query, s)``
pairs ``target[t]`` with ``query[t - s]``. A positive shift means the query
value precedes the target ("proceeding s weeks"), a negative shift means the
query lags it ("lagging |s| weeks").
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyOverlapError, GridMismatchError, OffGridDateError

WEEK = dt.timedelta(days=7)


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, str):
        try:
            return dt.date.fromisoformat(value)
        except ValueError:
            raise ValueError(f"invalid date {value!r} (expected yyyy-mm-dd)") from None
    raise TypeError(f"not a date: {value!r}")


@dataclass(frozen=True)
class WeekGrid:
    """Week index ``i`` starts on ``start_date + 7*i`` days."""

    start_date: dt.date
    length: int

    def __post_init__(self):
        object.__setattr__(self, "start_date", _as_date(self.start_date))
        if int(self.length) < 1:
            raise ValueError("a week grid needs at least one week")
        object.__setattr__(self, "length", int(self.length))

    def date_of(self, i: int) -> dt.date:
        if not 0 <= i < self.length:
            raise IndexError(f"week index {i} outside grid of {self.length} weeks")
        return self.start_date + i * WEEK

    @property
    def end_date(self) -> dt.date:
        """Start date of the last week."""
        return self.date_of(self.length - 1)

    def dates(self) -> list[dt.date]:
        return [self.start_date + i * WEEK for i in range(self.length)]

    def offset_of(self, date, snap: bool = False) -> int:
        """Signed week offset of ``date`` from the anchor; may fall outside the grid.

        Off-lattice dates raise unless ``snap`` is set, in which case the
        nearest lattice date is used.
        """
        days = (_as_date(date) - self.start_date).days
        weeks, rem = divmod(days, 7)
        if rem:
            if not snap:
                raise OffGridDateError(
                    f"off-grid date {_as_date(date).isoformat()}: "
                    f"{rem} day(s) from the weekly grid anchored {self.start_date.isoformat()}"
                )
            if rem >= 4:
                weeks += 1
        return weeks

    def index_of(self, date, snap: bool = False) -> int:
        i = self.offset_of(date, snap=snap)
        if not 0 <= i < self.length:
            raise IndexError(f"{_as_date(date).isoformat()} is outside the grid")
        return i

    def same_lattice(self, other: "WeekGrid") -> bool:
        return (other.start_date - self.start_date).days % 7 == 0

    def year_slice(self, year: int) -> slice:
        """Index range of weeks whose start date falls in ``year`` (may be empty)."""
        first = dt.date(year, 1, 1)
        last = dt.date(year, 12, 31)
        lo = max(0, -(-(first - self.start_date).days // 7))
        hi = min(self.length, (last - self.start_date).days // 7 + 1)
        return slice(lo, max(lo, hi))

    def years(self) -> list[int]:
        return list(range(self.start_date.year, self.end_date.year + 1))


def make_week_grid(start_date, n_weeks: int) -> WeekGrid:
    return WeekGrid(_as_date(start_date), n_weeks)


class TimeSeries:
    """Immutable week-aligned series; gaps are stored as NaN.

    ``values`` may be any sequence of floats or ``None``. Present values must
    be finite and non-negative unless ``signed=True`` (already z-scored
    exports contain negatives).
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: WeekGrid, values: Iterable[Optional[float]], signed: bool = False):
        if isinstance(values, np.ndarray):
            arr = np.array(values, dtype=np.float64)
        else:
            arr = np.array([np.nan if v is None else v for v in values], dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] != grid.length:
            raise ValueError(
                f"series has {arr.shape[0] if arr.ndim == 1 else arr.shape} values "
                f"for a {grid.length}-week grid"
            )
        present = arr[~np.isnan(arr)]
        if not np.all(np.isfinite(present)):
            raise ValueError("series values must be finite")
        if not signed and np.any(present < 0):
            raise ValueError("series values must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TimeSeries is immutable")

    def __len__(self) -> int:
        return self.grid.length

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values, equal_nan=True)

    def __repr__(self) -> str:
        return (
            f"TimeSeries(start={self.grid.start_date.isoformat()}, "
            f"weeks={self.grid.length}, gaps={self.n_gaps})"
        )

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def n_gaps(self) -> int:
        return int(np.isnan(self.values).sum())

    def to_list(self) -> list[Optional[float]]:
        return [None if np.isnan(v) else float(v) for v in self.values]

    def reindex(self, grid: WeekGrid) -> np.ndarray:
        """Values laid out on another grid of the same lattice, NaN where absent."""
        if not grid.same_lattice(self.grid):
            raise GridMismatchError(
                f"grid anchored {self.grid.start_date} is not on the weekly lattice of {grid.start_date}"
            )
        out = np.full(grid.length, np.nan)
        off = (self.grid.start_date - grid.start_date).days // 7
        lo = max(0, off)
        hi = min(grid.length, off + self.grid.length)
        if hi > lo:
            out[lo:hi] = self.values[lo - off:hi - off]
        return out


@dataclass(frozen=True)
class PairedSample:
    """Gap-free paired observations. ``weeks`` holds the target-grid indices."""

    xs: np.ndarray
    ys: np.ndarray
    shift: int
    weeks: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return int(self.xs.shape[0])


def align(target: TimeSeries, query: TimeSeries, shift: int = 0) -> PairedSample:
    """Pair ``target[t]`` with ``query[t - shift]`` wherever both are present.

    The two series may start on different dates as long as both sit on the
    same 7-day lattice.
    """
    shift = int(shift)
    if not target.grid.same_lattice(query.grid):
        raise GridMismatchError(
            f"mismatched grid anchors: {target.grid.start_date} vs {query.grid.start_date}"
        )
    if abs(shift) >= max(target.grid.length, query.grid.length):
        raise ValueError(f"|shift| = {abs(shift)} is not smaller than the grid length")
    # query local index j sits at target index j + off
    off = (query.grid.start_date - target.grid.start_date).days // 7
    lo = max(0, off + shift)
    hi = min(target.grid.length, off + shift + query.grid.length)
    if hi <= lo:
        raise EmptyOverlapError("empty overlap between target and query")
    t_idx = np.arange(lo, hi)
    xs = target.values[lo:hi]
    ys = query.values[lo - shift - off:hi - shift - off]
    keep = ~(np.isnan(xs) | np.isnan(ys))
    if not keep.any():
        raise EmptyOverlapError("empty overlap between target and query")
    return PairedSample(xs=xs[keep].copy(), ys=ys[keep].copy(), shift=shift, weeks=t_idx[keep])


def year_window(series: TimeSeries, year: int) -> TimeSeries:
    sl = series.grid.year_slice(year)
    if sl.stop <= sl.start:
        raise ValueError(f"year {year} is outside the series grid")
    if sl.start == 0 and sl.stop == series.grid.length:
        return series
    grid = WeekGrid(series.grid.date_of(sl.start), sl.stop - sl.start)
    return TimeSeries(grid, series.values[sl], signed=True)


def from_values(start_date, values: Sequence[Optional[float]], signed: bool = False) -> TimeSeries:
    """Convenience constructor: a series whose grid is exactly ``values`` long."""
    return TimeSeries(make_week_grid(start_date, len(values)), values, signed=signed)
