"""Correlation statistics: z-scores, Pearson r, t-test p-values, lag and yearly scans.

Degenerate inputs (constant windows, fewer than two paired weeks) produce NA
estimates rather than exceptions so whole-corpus scans never abort on one
bad series. NA is represented by ``defined=False`` with ``r`` and ``p`` NaN.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import EmptyOverlapError, ZeroVarianceError
from .series import PairedSample, TimeSeries, align, year_window

DEFAULT_SHIFTS = (-1, 0, 1, 2)
DEFAULT_YEARS = (2009, 2010, 2011, 2012, 2013)

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000

NA = math.nan


@dataclass(frozen=True)
class CorrelationEstimate:
    r: float
    n: int
    p: float
    shift: int = 0
    defined: bool = True

    @classmethod
    def na(cls, n: int = 0, shift: int = 0) -> "CorrelationEstimate":
        return cls(r=NA, n=int(n), p=NA, shift=int(shift), defined=False)

    @classmethod
    def from_r(cls, r: float, n: int, shift: int = 0) -> "CorrelationEstimate":
        """Estimate for a known coefficient; p is derived when ``n >= 3``."""
        if r is None or (isinstance(r, float) and math.isnan(r)):
            return cls.na(n, shift)
        r = float(r)
        p = p_value(r, n) if n >= 3 else NA
        return cls(r=r, n=int(n), p=p, shift=int(shift), defined=True)

    @property
    def significant(self) -> bool:
        return self.defined and not math.isnan(self.p) and self.p < 0.05


def incomplete_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Continued fraction evaluated with the modified Lentz method; for
    ``x > (a + 1) / (a + b + 2)`` the symmetry I_x(a, b) = 1 - I_{1-x}(b, a) is
    used so the fraction always converges quickly.
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"incomplete_beta needs a > 0 and b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"incomplete_beta needs 0 <= x <= 1, got x={x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - _ibeta_cf(b, a, 1.0 - x)
    return _ibeta_cf(a, b, x)


def _ibeta_cf(a: float, b: float, x: float) -> float:
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front) / a
    c = 1.0
    d = 1.0 - (a + b) * x / (a + 1.0)
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    else:  # pragma: no cover - convergence is O(sqrt(max(a, b))) steps
        raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")
    return min(1.0, max(0.0, front * h))


def p_value(r: float, n: int) -> float:
    """Two-sided p for H0: rho = 0 via t = r*sqrt((n-2)/(1-r^2)), df = n-2.

    Uses P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2), and df/(df+t^2) reduces to
    1 - r^2, evaluated as (1-r)(1+r) to keep precision near |r| = 1.
    """
    if n < 3:
        raise ValueError(f"p-value needs n >= 3, got n={n}")
    if not abs(r) <= 1.0:
        raise ValueError(f"|r| must be <= 1, got r={r}")
    r = abs(float(r))
    if r == 0.0:
        return 1.0
    if r == 1.0:
        return 0.0
    df = n - 2
    return incomplete_beta(df / 2.0, 0.5, (1.0 - r) * (1.0 + r))


def zscore(values: Sequence[float]) -> np.ndarray:
    """Mean-0, sample-sd-1 rescaling of a gap-free sequence."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("zscore needs at least two values")
    if np.isnan(x).any():
        raise ValueError("zscore needs a gap-free sequence")
    if x.min() == x.max():
        raise ZeroVarianceError("zero variance: cannot z-score a constant series")
    d = x - x.mean()
    sd = math.sqrt(float(np.dot(d, d)) / (x.shape[0] - 1))
    if not sd > 0 or not math.isfinite(sd):
        raise ZeroVarianceError("zero variance: spread underflows at this scale")
    return d / sd


def pearson(sample: PairedSample) -> CorrelationEstimate:
    xs = np.asarray(sample.xs, dtype=np.float64)
    ys = np.asarray(sample.ys, dtype=np.float64)
    n = xs.shape[0]
    if n < 2 or xs.min() == xs.max() or ys.min() == ys.max():
        return CorrelationEstimate.na(n, sample.shift)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    r = float(np.dot(dx, dy) / math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy))))
    if abs(r) > 1.0 and abs(r) - 1.0 < 1e-12:
        r = math.copysign(1.0, r)
    p = p_value(r, n) if n >= 3 else NA
    return CorrelationEstimate(r=r, n=n, p=p, shift=sample.shift, defined=True)


def correlate(target: TimeSeries, query: TimeSeries, shift: int = 0) -> CorrelationEstimate:
    """align + pearson; an empty overlap is reported as an NA estimate."""
    try:
        sample = align(target, query, shift)
    except EmptyOverlapError:
        return CorrelationEstimate.na(0, shift)
    return pearson(sample)


def best_shift(estimates: Mapping[int, CorrelationEstimate]) -> Optional[int]:
    """Max r; ties go to the smallest |shift|, then the smaller signed shift."""
    cands = [(s, e.r) for s, e in estimates.items() if e.defined]
    if not cands:
        return None
    return min(cands, key=lambda c: (-c[1], abs(c[0]), c[0]))[0]


def best_year(by_year: Mapping[int, CorrelationEstimate]) -> Optional[int]:
    """Max r among defined years; ties go to the earliest year."""
    cands = [(y, e.r) for y, e in by_year.items() if e.defined]
    if not cands:
        return None
    return min(cands, key=lambda c: (-c[1], c[0]))[0]


@dataclass(frozen=True)
class LagRow:
    query: str
    estimates: dict
    best_shift: Optional[int] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "estimates", dict(sorted(self.estimates.items())))
        object.__setattr__(self, "best_shift", best_shift(self.estimates))

    @classmethod
    def from_values(cls, query: str, values: Mapping[int, Optional[float]], n: int = 520) -> "LagRow":
        """Row built from known coefficients (e.g. digitized tables); NA as None."""
        return cls(query, {
            s: CorrelationEstimate.from_r(v, n - abs(s), s) for s, v in values.items()
        })


@dataclass(frozen=True)
class YearlyRow:
    query: str
    by_year: dict
    best_year: Optional[int] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "by_year", dict(sorted(self.by_year.items())))
        object.__setattr__(self, "best_year", best_year(self.by_year))

    @classmethod
    def from_values(cls, query: str, values: Mapping[int, Optional[float]], n: int = 52) -> "YearlyRow":
        return cls(query, {y: CorrelationEstimate.from_r(v, n) for y, v in values.items()})


def lag_scan(target: TimeSeries, query: TimeSeries, shifts: Iterable[int] = DEFAULT_SHIFTS,
             name: str = "") -> LagRow:
    shifts = [int(s) for s in shifts]
    if not shifts:
        raise ValueError("lag_scan needs at least one shift")
    estimates = {}
    empty = 0
    for s in shifts:
        try:
            estimates[s] = pearson(align(target, query, s))
        except EmptyOverlapError:
            empty += 1
            estimates[s] = CorrelationEstimate.na(0, s)
    if empty == len(shifts):
        raise EmptyOverlapError(f"every shift gives an empty overlap for query {name!r}")
    return LagRow(name, estimates)


def yearly_scan(target: TimeSeries, query: TimeSeries, years: Iterable[int] = DEFAULT_YEARS,
                name: str = "") -> YearlyRow:
    """Zero-shift correlation within each calendar year of the target's grid."""
    years = [int(y) for y in years]
    if not years:
        raise ValueError("yearly_scan needs at least one year")
    by_year = {}
    for y in years:
        try:
            window = year_window(target, y)
        except ValueError:
            by_year[y] = CorrelationEstimate.na(0)
            continue
        by_year[y] = correlate(window, query, 0)
    return YearlyRow(name, by_year)


def average_yearly(rows: Sequence[YearlyRow]) -> dict:
    """Per year, the arithmetic mean of defined r across rows; all-NA years omitted."""
    if not rows:
        raise ValueError("average_yearly needs at least one row")
    years = sorted({y for row in rows for y in row.by_year})
    out = {}
    for y in years:
        vals = [row.by_year[y].r for row in rows if y in row.by_year and row.by_year[y].defined]
        if vals:
            out[y] = math.fsum(vals) / len(vals)
    return out
