"""Embedded invariant checks for ``correlate selftest``.

Each check returns ``(name, passed, detail)``. No test-only dependencies are
used, so this runs on a bare install.
"""
from __future__ import annotations

import math

import numpy as np

from .index import build_index, recall, search_approx, search_exact, QueryRecord, CorpusIndex
from .series import align, make_week_grid
from .stats import incomplete_beta, lag_scan, p_value, pearson
from .synth import as_series, random_walk_series, synthetic_corpus, synthetic_target

# two-sided 5% critical r from standard tables, keyed by df
CRITICAL_R = {5: 0.7545, 8: 0.6319, 18: 0.4438, 48: 0.2787}


def _direct_r(x, y):
    mx = math.fsum(x) / len(x)
    my = math.fsum(y) / len(y)
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def check_pearson_direct(n_pairs=200, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.random(520) * 10
        y = 0.5 * x + rng.random(520) * 10
        sample = align(as_series(x), as_series(y), 0)
        worst = max(worst, abs(pearson(sample).r - _direct_r(x.tolist(), y.tolist())))
    return "pearson matches direct formula", worst < 1e-12, f"max |dr| = {worst:.2e}"


def check_affine(n_pairs=200, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.standard_normal(520)
        y = x + rng.standard_normal(520)
        a = rng.uniform(0.01, 100)
        b = rng.uniform(-100, 100)
        base = pearson(align(as_series(x, signed=True), as_series(y, signed=True))).r
        up = pearson(align(as_series(a * x + b, signed=True), as_series(y, signed=True))).r
        down = pearson(align(as_series(-a * x + b, signed=True), as_series(y, signed=True))).r
        swapped = pearson(align(as_series(y, signed=True), as_series(x, signed=True))).r
        worst = max(worst, abs(up - base), abs(down + base), abs(swapped - base))
    return "affine invariance and symmetry", worst < 1e-12, f"max deviation = {worst:.2e}"


def check_p_values():
    worst = 0.0
    for df, r in CRITICAL_R.items():
        worst = max(worst, abs(p_value(r, df + 2) - 0.05))
    ok = worst < 2e-3 and p_value(0.0, 10) == 1.0 and p_value(1 - 1e-12, 10) < 1e-9
    ok &= abs(incomplete_beta(3.7, 3.7, 0.5) - 0.5) < 1e-12
    return "p-values at textbook critical r", ok, f"max |p - 0.05| = {worst:.2e}"


def check_lag_recovery(n_targets=100, seed=3):
    rng = np.random.default_rng(seed)
    misses = 0
    total = 0
    for k in (-2, -1, 0, 1, 2):
        for _ in range(n_targets):
            q = random_walk_series(rng, 522)
            tgt = np.full(522, np.nan)
            tgt[2:520] = q[2 - k:520 - k]
            tgt[2:520] += 0.01 * q.std() * rng.standard_normal(518)
            tgt = np.clip(tgt, 0.0, None)
            row = lag_scan(as_series(tgt), as_series(q), range(-2, 3))
            misses += row.best_shift != k
            total += 1
    rate = 1 - misses / total
    return "lag recovery (1% noise)", rate >= 0.99, f"hit rate = {rate:.3f}"


def check_search(n_records=5000, seed=4):
    values, topics = synthetic_corpus(n_records, 520, seed=seed)
    grid = make_week_grid("2004-01-04", 520)
    index = CorpusIndex.from_matrix("XX", grid, [f"q{i:05d}" for i in range(n_records)], values, d=32, seed=seed)
    recalls = []
    exact_ok = True
    for j in range(5):
        target = as_series(synthetic_target(topics, seed=100 + j))
        ex = search_exact(index, target, 20)
        ap = search_approx(index, target, 20, 10)
        recalls.append(recall(ap, ex))
        by_q = {res.query: res.estimate.r for res in ex}
        exact_ok &= all(abs(res.estimate.r - by_q[res.query]) < 1e-12 for res in ap if res.query in by_q)
    copy = QueryRecord("copy", "XX", as_series(values[0]))
    small = build_index([copy, QueryRecord("other", "XX", as_series(values[1]))], d=16, seed=1)
    self_hit = search_approx(small, as_series(values[0]), 1)[0]
    ok = np.mean(recalls) >= 0.95 and exact_ok and self_hit.query == "copy" and self_hit.estimate.r == 1.0
    return "approximate search recall", ok, f"mean recall@20 = {np.mean(recalls):.3f}"


def run_all(quick: bool = False):
    scale = 4 if quick else 1
    yield check_pearson_direct(200 // scale)
    yield check_affine(200 // scale)
    yield check_p_values()
    yield check_lag_recovery(100 // scale)
    yield check_search(5000 // scale)
