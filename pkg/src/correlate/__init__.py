"""Correlation search over weekly time series: rank, lag-scan, yearly windows, reports."""
from .errors import CorrelateError
from .index import CorpusIndex, QueryRecord, RankedResult, build_index, search_approx, search_exact
from .series import PairedSample, TimeSeries, WeekGrid, align, make_week_grid, year_window
from .stats import (
    CorrelationEstimate,
    LagRow,
    YearlyRow,
    average_yearly,
    incomplete_beta,
    lag_scan,
    p_value,
    pearson,
    yearly_scan,
    zscore,
)

__version__ = "0.1.0"
