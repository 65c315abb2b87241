import json

import numpy as np
import pytest

from correlate.errors import EmptyOverlapError, GridMismatchError, IndexFormatError, UnknownQueryError
from correlate.index import (
    CorpusIndex,
    QueryRecord,
    build_index,
    projection_matrix,
    recall,
    search_approx,
    search_exact,
)
from correlate.series import TimeSeries, make_week_grid
from correlate.synth import as_series, synthetic_corpus, synthetic_target

from oracles import brute_top_k

GRID = make_week_grid("2004-01-04", 120)


def rec(name, values, country="MY"):
    return QueryRecord(name, country, TimeSeries(GRID, values, signed=True))


@pytest.fixture(scope="module")
def rng_records():
    rng = np.random.default_rng(0)
    return [rec(f"q{i}", rng.random(120) * 5) for i in range(30)]


def test_build_is_deterministic(rng_records):
    a = build_index(rng_records[:3], d=32, seed=7)
    b = build_index(rng_records[:3], d=32, seed=7)
    assert a.sketches.tobytes() == b.sketches.tobytes()
    c = build_index(rng_records[:3], d=32, seed=8)
    assert a.sketches.tobytes() != c.sketches.tobytes()


def test_projection_pure():
    assert np.array_equal(projection_matrix(3, 50, 16), projection_matrix(3, 50, 16))
    p = projection_matrix(3, 50, 16)
    assert set(np.unique(p * 4)) == {-1.0, 1.0}


def test_sketches_unit_length(rng_records):
    idx = build_index(rng_records + [rec("flat", np.full(120, 2.0))], d=16, seed=0)
    norms = np.linalg.norm(idx.sketches, axis=1)
    assert np.allclose(norms[:-1], 1.0, atol=1e-14) and norms[-1] == 0.0
    t = rng_records[4].series
    assert float(idx.sketches[4] @ idx.target_sketch(idx.target_vector(t))) == pytest.approx(1.0, abs=1e-14)


def test_constant_record_unsketchable(rng_records):
    idx = build_index(rng_records[:3] + [rec("flat", np.full(120, 2.0))], d=16, seed=0)
    assert idx.sketchable.tolist() == [True, True, True, False]
    target = rng_records[0].series
    exact = search_exact(idx, target, 10)
    assert "flat" not in {r.query for r in exact}
    assert len(exact) == 3


def test_build_errors(rng_records):
    with pytest.raises(ValueError):
        build_index([])
    other = QueryRecord("x", "MY", TimeSeries(make_week_grid("2004-01-05", 120), np.ones(120)))
    with pytest.raises(GridMismatchError):
        build_index([rng_records[0], other])
    with pytest.raises(ValueError, match="mixed countries"):
        build_index([rng_records[0], rec("y", np.arange(120.0), country="PH")])
    with pytest.raises(ValueError):
        build_index(rng_records[:2], d=4)
    with pytest.raises(ValueError, match="duplicate"):
        build_index([rng_records[0], rng_records[0]])


def test_self_match_rank_one(rng_records):
    idx = build_index(rng_records, d=32, seed=1)
    target = rng_records[5].series
    for results in (search_exact(idx, target, 5), search_approx(idx, target, 5)):
        assert results[0].query == "q5"
        assert results[0].estimate.r == 1.0
        assert results[0].rank == 1


def test_sign_symmetry():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(120)
    idx = build_index([rec("copy", x), rec("neg", -x)], d=16, seed=0)
    res = search_exact(idx, TimeSeries(GRID, x, signed=True), 2)
    assert [(r.query, r.estimate.r) for r in res] == [("copy", 1.0), ("neg", -1.0)]


def test_exact_matches_brute_force_1000():
    rng = np.random.default_rng(4)
    values = rng.random((1000, 120))
    values[rng.random((1000, 120)) < 0.02] = np.nan
    names = [f"r{i:04d}" for i in range(1000)]
    idx = CorpusIndex.from_matrix("MY", GRID, names, values, d=32, seed=0)
    target = rng.random(120)
    got = search_exact(idx, TimeSeries(GRID, target), 20)
    want = brute_top_k(values, target, 20)
    assert [r.query for r in got] == [names[i] for _, i in want]
    for res, (r, _) in zip(got, want):
        assert abs(res.estimate.r - r) < 1e-12


def test_ties_broken_by_query_name():
    x = np.arange(120.0)
    idx = build_index([rec("b", x), rec("a", 2 * x + 1), rec("c", x + 5)], d=16, seed=0)
    res = search_exact(idx, TimeSeries(GRID, x), 3)
    assert [r.query for r in res] == ["a", "b", "c"]
    assert [r.rank for r in res] == [1, 2, 3]


def test_exhaustive_limit_identical(rng_records):
    idx = build_index(rng_records, d=16, seed=2)
    target = as_series(np.random.default_rng(9).random(120))
    assert search_approx(idx, target, 10, oversample=100) == search_exact(idx, target, 10)


def test_k_larger_than_defined(rng_records):
    idx = build_index(rng_records[:4], d=16, seed=2)
    assert len(search_exact(idx, rng_records[0].series, 50)) == 4
    assert len(search_approx(idx, rng_records[0].series, 50)) == 4


def test_empty_overlap():
    idx = build_index([rec("a", np.arange(120.0))], d=8, seed=0)
    far = as_series([1.0, 2.0, 3.0], start="2010-01-03")
    with pytest.raises(EmptyOverlapError):
        search_exact(idx, far, 3)
    with pytest.raises(EmptyOverlapError):
        search_approx(idx, far, 3)


def test_target_on_shifted_lattice_rejected():
    idx = build_index([rec("a", np.arange(120.0))], d=8, seed=0)
    with pytest.raises(GridMismatchError):
        search_exact(idx, as_series([1.0, 2.0, 3.0], start="2004-01-06"), 1)


def test_bad_k(rng_records):
    idx = build_index(rng_records[:3], d=8, seed=0)
    with pytest.raises(ValueError):
        search_exact(idx, rng_records[0].series, 0)
    with pytest.raises(ValueError):
        search_approx(idx, rng_records[0].series, 1, oversample=0)


@pytest.fixture(scope="module")
def synth_index():
    values, topics = synthetic_corpus(8000, 520, seed=11)
    grid = make_week_grid("2004-01-04", 520)
    idx = CorpusIndex.from_matrix("XX", grid, [f"s{i:05d}" for i in range(8000)], values, d=32, seed=5)
    return idx, topics


def test_approx_results_exactly_scored(synth_index):
    idx, topics = synth_index
    target = as_series(synthetic_target(topics, seed=1))
    exact = {r.query: r.estimate.r for r in search_exact(idx, target, 8000)}
    for res in search_approx(idx, target, 20):
        assert abs(res.estimate.r - exact[res.query]) < 1e-12
    listed = [r.query for r in search_approx(idx, target, 20)]
    assert len(listed) == len(set(listed))


def test_recall_monotone_in_oversample(synth_index):
    idx, topics = synth_index
    for j in range(3):
        target = as_series(synthetic_target(topics, seed=20 + j, noise=0.8))
        exact = search_exact(idx, target, 20)
        recalls = [recall(search_approx(idx, target, 20, m), exact) for m in (1, 2, 3, 5, 10, 40)]
        assert recalls == sorted(recalls)


def test_parallel_scoring_identical(synth_index):
    idx, topics = synth_index
    target = as_series(synthetic_target(topics, seed=3))
    base = search_exact(idx, target, 50, workers=1)
    for w in (2, 3, 7):
        assert search_exact(idx, target, 50, workers=w) == base


def test_save_load_roundtrip(tmp_path, rng_records):
    records = rng_records[:5] + [rec("莲花清瘟胶囊 (Lian-Hua-Qing-Wen capsule)", np.arange(120.0))]
    idx = build_index(records, d=16, seed=3)
    idx.save(tmp_path / "store")
    back = CorpusIndex.load(tmp_path / "store")
    assert back.queries == idx.queries
    assert back.grid == idx.grid and back.country == "MY"
    assert back.values.tobytes() == idx.values.tobytes()
    assert back.sketches.tobytes() == idx.sketches.tobytes()
    assert np.array_equal(back.projection, idx.projection)
    target = rng_records[2].series
    assert search_approx(back, target, 3) == search_approx(idx, target, 3)


def test_load_refuses_other_versions(tmp_path, rng_records):
    store = build_index(rng_records[:2], d=8, seed=0).save(tmp_path / "s")
    manifest = json.loads((store / "manifest.json").read_text())
    manifest["format_version"] = 99
    (store / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(IndexFormatError, match="version"):
        CorpusIndex.load(store)


def test_load_refuses_bad_column(tmp_path, rng_records):
    store = build_index(rng_records[:2], d=8, seed=0).save(tmp_path / "s")
    raw = bytearray((store / "values.col").read_bytes())
    raw[:8] = b"NOTMAGIC"
    (store / "values.col").write_bytes(bytes(raw))
    with pytest.raises(IndexFormatError, match="magic"):
        CorpusIndex.load(store)
    with pytest.raises(IndexFormatError):
        CorpusIndex.load(tmp_path / "missing")


def test_unknown_query_near_misses(rng_records):
    idx = build_index(rng_records[:12], d=8, seed=0)
    with pytest.raises(UnknownQueryError, match="near misses: 'q1'"):
        idx.position("q1x")
