"""Seeded synthetic search-volume corpora for tests, benchmarks and selftest.

Records mimic weekly query-volume exports: each is a non-negative mix of a
latent "topic" curve (seasonal wave plus a few epidemic bumps), a weaker
second topic, and white noise whose level varies from record to record.
"""
from __future__ import annotations

import numpy as np

from .series import TimeSeries, make_week_grid

START = "2004-01-04"


def topic_curves(rng: np.random.Generator, n_topics: int, n_weeks: int) -> np.ndarray:
    t = np.arange(n_weeks)
    curves = np.zeros((n_topics, n_weeks))
    for k in range(n_topics):
        period = rng.uniform(40.0, 60.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        curves[k] += rng.uniform(0.0, 1.0) * (1.0 + np.sin(2 * np.pi * t / period + phase))
        for _ in range(rng.integers(1, 4)):
            centre = rng.uniform(0, n_weeks)
            width = rng.uniform(2.0, 15.0)
            curves[k] += rng.uniform(1.0, 5.0) * np.exp(-0.5 * ((t - centre) / width) ** 2)
    return curves


def synthetic_corpus(n_records: int, n_weeks: int = 520, seed: int = 0, n_topics: int | None = None):
    """Return ``(values, topics)``: an (n_records, n_weeks) matrix and the latent curves.

    By default there is one topic per ~400 records, so corpora of any size
    have comparable per-topic density.
    """
    if n_topics is None:
        n_topics = max(4, n_records // 400)
    rng = np.random.default_rng(seed)
    topics = topic_curves(rng, n_topics, n_weeks)
    main = rng.integers(0, n_topics, n_records)
    extra = rng.integers(0, n_topics, n_records)
    extra_w = rng.uniform(0.0, 0.5, n_records)
    noise = np.exp(rng.uniform(np.log(0.05), np.log(3.0), n_records))
    values = np.empty((n_records, n_weeks))
    for lo in range(0, n_records, 8192):
        hi = min(n_records, lo + 8192)
        block = topics[main[lo:hi]] + extra_w[lo:hi, None] * topics[extra[lo:hi]]
        sd = block.std(axis=1, keepdims=True)
        block += noise[lo:hi, None] * sd * rng.standard_normal((hi - lo, n_weeks))
        np.clip(block, 0.0, None, out=block)
        values[lo:hi] = block
    return values, topics


def synthetic_target(topics: np.ndarray, seed: int, noise: float = 0.1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    curve = topics[rng.integers(0, topics.shape[0])]
    out = curve + noise * curve.std() * rng.standard_normal(curve.shape[0])
    return np.clip(out, 0.0, None)


def random_walk_series(rng: np.random.Generator, n_weeks: int) -> np.ndarray:
    """Non-constant positive series with strong autocorrelation."""
    return np.abs(np.cumsum(rng.standard_normal(n_weeks))) + 1.0


def as_series(values, start=START, signed: bool = False) -> TimeSeries:
    return TimeSeries(make_week_grid(start, len(values)), np.asarray(values, dtype=np.float64), signed=signed)
