"""Hot loops: gap-aware Pearson scoring of many rows against one target.

Each kernel exists twice. ``*_numba`` versions are ``@njit`` compiled; the
``*_numpy`` versions are vectorised fallbacks. The module-level names
(``pearson_rows`` and friends) pick one according to ``_accel.USE_NUMBA``.

Both paths compute, per row, the two-pass centred formula over the weeks
where target and row are both present (NaN marks a gap). A row is undefined
(``r`` is NaN) when fewer than two weeks pair up or either side is constant
over the paired weeks.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

_CLAMP = 1e-12
_CHUNK = 2048


@njit(cache=True, nogil=True)
def _pearson_rows_numba(values, target, r_out, n_out):
    n_rows, n_cols = values.shape
    for i in range(n_rows):
        cnt = 0
        sx = 0.0
        sy = 0.0
        for t in range(n_cols):
            x = target[t]
            y = values[i, t]
            if x == x and y == y:
                cnt += 1
                sx += x
                sy += y
        n_out[i] = cnt
        if cnt < 2:
            r_out[i] = np.nan
            continue
        mx = sx / cnt
        my = sy / cnt
        sxx = 0.0
        syy = 0.0
        sxy = 0.0
        xlo = np.inf
        xhi = -np.inf
        ylo = np.inf
        yhi = -np.inf
        for t in range(n_cols):
            x = target[t]
            y = values[i, t]
            if x == x and y == y:
                dx = x - mx
                dy = y - my
                sxx += dx * dx
                syy += dy * dy
                sxy += dx * dy
                if x < xlo:
                    xlo = x
                if x > xhi:
                    xhi = x
                if y < ylo:
                    ylo = y
                if y > yhi:
                    yhi = y
        if xlo == xhi or ylo == yhi:
            r_out[i] = np.nan
            continue
        r = sxy / math.sqrt(sxx * syy)
        if r > 1.0 and r - 1.0 < _CLAMP:
            r = 1.0
        elif r < -1.0 and -1.0 - r < _CLAMP:
            r = -1.0
        r_out[i] = r


def _pearson_rows_numpy(values, target, r_out, n_out):
    tmask = ~np.isnan(target)
    for lo in range(0, values.shape[0], _CHUNK):
        block = values[lo:lo + _CHUNK]
        mask = tmask & ~np.isnan(block)
        cnt = mask.sum(axis=1)
        n_out[lo:lo + block.shape[0]] = cnt
        x = np.where(mask, target, 0.0)
        y = np.where(mask, block, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mx = x.sum(axis=1) / cnt
            my = y.sum(axis=1) / cnt
            dx = np.where(mask, x - mx[:, None], 0.0)
            dy = np.where(mask, y - my[:, None], 0.0)
            sxx = np.einsum("ij,ij->i", dx, dx)
            syy = np.einsum("ij,ij->i", dy, dy)
            sxy = np.einsum("ij,ij->i", dx, dy)
            r = sxy / np.sqrt(sxx * syy)
        const = (
            (np.where(mask, x, np.inf).min(axis=1) == np.where(mask, x, -np.inf).max(axis=1))
            | (np.where(mask, y, np.inf).min(axis=1) == np.where(mask, y, -np.inf).max(axis=1))
        )
        r[const | (cnt < 2)] = np.nan
        over = np.abs(r) > 1.0
        r[over & (np.abs(r) - 1.0 < _CLAMP)] = np.sign(r[over & (np.abs(r) - 1.0 < _CLAMP)])
        r_out[lo:lo + block.shape[0]] = r


def _prepare(values, target):
    values = np.ascontiguousarray(values, dtype=np.float64)
    target = np.ascontiguousarray(target, dtype=np.float64)
    if values.ndim != 2 or target.ndim != 1 or values.shape[1] != target.shape[0]:
        raise ValueError(f"shape mismatch: rows {values.shape}, target {target.shape}")
    return values, target


def pearson_rows_numba(values, target):
    """Score every row of ``values`` (N, T) against ``target`` (T,).

    Returns ``(r, n)``: correlation per row (NaN when undefined) and paired
    week count per row.
    """
    values, target = _prepare(values, target)
    r = np.empty(values.shape[0])
    n = np.empty(values.shape[0], dtype=np.int64)
    _pearson_rows_numba(values, target, r, n)
    return r, n


def pearson_rows_numpy(values, target):
    values, target = _prepare(values, target)
    r = np.empty(values.shape[0])
    n = np.empty(values.shape[0], dtype=np.int64)
    _pearson_rows_numpy(values, target, r, n)
    return r, n


@njit(cache=True, nogil=True)
def _unit_zscore_rows_numba(values, out, ok):
    n_rows, n_cols = values.shape
    for i in range(n_rows):
        cnt = 0
        s = 0.0
        lo = np.inf
        hi = -np.inf
        for t in range(n_cols):
            v = values[i, t]
            if v == v:
                cnt += 1
                s += v
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
        if cnt < 2 or lo == hi:
            ok[i] = False
            for t in range(n_cols):
                out[i, t] = 0.0
            continue
        ok[i] = True
        m = s / cnt
        ss = 0.0
        for t in range(n_cols):
            v = values[i, t]
            if v == v:
                ss += (v - m) * (v - m)
        norm = math.sqrt(ss)
        for t in range(n_cols):
            v = values[i, t]
            out[i, t] = (v - m) / norm if v == v else 0.0


def _unit_zscore_rows_numpy(values, out, ok):
    for lo in range(0, values.shape[0], _CHUNK):
        block = values[lo:lo + _CHUNK]
        mask = ~np.isnan(block)
        cnt = mask.sum(axis=1)
        lo_v = np.where(mask, block, np.inf).min(axis=1)
        hi_v = np.where(mask, block, -np.inf).max(axis=1)
        good = (cnt >= 2) & (lo_v != hi_v)
        with np.errstate(invalid="ignore", divide="ignore"):
            m = np.where(mask, block, 0.0).sum(axis=1) / cnt
            d = np.where(mask, block - m[:, None], 0.0)
            norm = np.sqrt(np.einsum("ij,ij->i", d, d))
            z = d / norm[:, None]
        z[~good] = 0.0
        out[lo:lo + block.shape[0]] = z
        ok[lo:lo + block.shape[0]] = good


def unit_zscore_rows_numba(values):
    """Centre each row over its present values and scale to unit L2 norm.

    Gaps become 0. Returns ``(z, ok)``; ``ok`` is False for constant rows and
    rows with fewer than two present values (those come back all zeros).
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.empty_like(values)
    ok = np.empty(values.shape[0], dtype=np.bool_)
    _unit_zscore_rows_numba(values, out, ok)
    return out, ok


def unit_zscore_rows_numpy(values):
    values = np.ascontiguousarray(values, dtype=np.float64)
    out = np.empty_like(values)
    ok = np.empty(values.shape[0], dtype=np.bool_)
    _unit_zscore_rows_numpy(values, out, ok)
    return out, ok


if _accel.USE_NUMBA:
    pearson_rows = pearson_rows_numba
    unit_zscore_rows = unit_zscore_rows_numba
    BACKEND = "numba"
else:
    pearson_rows = pearson_rows_numpy
    unit_zscore_rows = unit_zscore_rows_numpy
    BACKEND = "numpy"
