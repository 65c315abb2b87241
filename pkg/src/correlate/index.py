"""Corpus index: exhaustive and sketch-pruned top-k correlation search.

Records are stored as one (N, T) float64 matrix on a shared week grid, NaN
for gaps. Each record also carries a d-wide sketch: the projection of its
centred, unit-norm series onto seeded random sign vectors. For unit vectors
Pearson r is a plain dot product, so sketch dot products estimate r and can
prune the corpus before exact rescoring.
"""
from __future__ import annotations

import datetime as dt
import difflib
import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import EmptyOverlapError, GridMismatchError, IndexFormatError, UnknownQueryError
from .series import TimeSeries, WeekGrid
from .stats import CorrelationEstimate

FORMAT_VERSION = 1
MANIFEST_MAGIC = "correlate-index"
COLUMN_MAGIC = b"CORRCOL\x00"
# magic, version, dtype code, rows, cols
_HEADER = struct.Struct("<8sI4sQQ")
_DTYPES = {b"f8  ": np.dtype("<f8"), b"u1  ": np.dtype("u1")}

DEFAULT_D = 32
DEFAULT_OVERSAMPLE = 10


@dataclass(frozen=True)
class QueryRecord:
    query: str
    country: str
    series: TimeSeries

    def __post_init__(self):
        if not self.query:
            raise ValueError("query string must be nonempty")


@dataclass(frozen=True)
class RankedResult:
    query: str
    estimate: CorrelationEstimate
    rank: int


def projection_matrix(seed: int, n_weeks: int, d: int) -> np.ndarray:
    """(n_weeks, d) matrix of +-1/sqrt(d); a pure function of its arguments."""
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=(n_weeks, d), dtype=np.int8) * 2 - 1
    return signs.astype(np.float64) / math.sqrt(d)


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(a, axis=1, keepdims=True)
    return np.divide(a, norm, out=np.zeros_like(a), where=norm > 0)


def _sketch(values: np.ndarray, proj: np.ndarray, chunk: int = 8192):
    """Projected unit z-scores, rescaled to unit length.

    The raw projected dot product is unbiased for r but its spread grows with
    r (about sqrt((1 + r^2) / d)); the cosine of the projections is tight
    exactly where the top candidates live, so stage 1 ranks by that.
    """
    n = values.shape[0]
    sketches = np.empty((n, proj.shape[1]))
    ok = np.empty(n, dtype=bool)
    for lo in range(0, n, chunk):
        z, good = kernels.unit_zscore_rows(values[lo:lo + chunk])
        sketches[lo:lo + chunk] = _unit_rows(z @ proj)
        ok[lo:lo + chunk] = good
    return sketches, ok


class CorpusIndex:
    """Immutable store of one country's query series plus their sketches.

    Build with :func:`build_index` or :meth:`from_matrix`; persist with
    :meth:`save` / :meth:`load`.
    """

    def __init__(self, country, grid, queries, values, sketches, sketchable, d, seed):
        self.country = country
        self.grid = grid
        self.queries = tuple(queries)
        self.values = values
        self.sketches = sketches
        self.sketchable = sketchable
        self.d = int(d)
        self.seed = int(seed)
        for arr in (values, sketches, sketchable):
            arr.setflags(write=False)
        self._pos = {q: i for i, q in enumerate(self.queries)}
        self._proj = None
        # weeks where at least one record has a value
        self.coverage = ~np.isnan(values).all(axis=0)

    @classmethod
    def from_matrix(cls, country: str, grid: WeekGrid, queries: Sequence[str], values,
                    d: int = DEFAULT_D, seed: int = 0) -> "CorpusIndex":
        values = np.array(values, dtype=np.float64, order="C")
        if values.ndim != 2 or values.shape[0] == 0:
            raise ValueError("index needs a nonempty (records, weeks) matrix")
        if values.shape[1] != grid.length:
            raise GridMismatchError(f"matrix has {values.shape[1]} weeks, grid has {grid.length}")
        if len(queries) != values.shape[0]:
            raise ValueError("one query name per row required")
        if len(set(queries)) != len(queries):
            raise ValueError("duplicate query names in index")
        if d < 8:
            raise ValueError(f"sketch width d must be >= 8, got {d}")
        proj = projection_matrix(seed, grid.length, d)
        sketches, ok = _sketch(values, proj)
        idx = cls(country, grid, queries, values, sketches, ok, d, seed)
        idx._proj = proj
        return idx

    def __len__(self) -> int:
        return len(self.queries)

    @property
    def projection(self) -> np.ndarray:
        if self._proj is None:
            self._proj = projection_matrix(self.seed, self.grid.length, self.d)
        return self._proj

    def position(self, query: str) -> int:
        try:
            return self._pos[query]
        except KeyError:
            raise UnknownQueryError(self._unknown_message(query)) from None

    def _unknown_message(self, query: str) -> str:
        key = query.casefold()
        folded = {q.casefold(): q for q in self.queries}
        near = [q for f, q in folded.items() if f and (f in key or key in f)]
        near.sort(key=lambda q: (abs(len(q) - len(query)), q))
        for f in difflib.get_close_matches(key, list(folded), n=5, cutoff=0.6):
            if folded[f] not in near:
                near.append(folded[f])
        msg = f"unknown query {query!r}"
        if near:
            msg += "; near misses: " + ", ".join(repr(q) for q in near[:5])
        return msg

    def record(self, query: str) -> QueryRecord:
        i = self.position(query)
        return QueryRecord(query, self.country, TimeSeries(self.grid, self.values[i], signed=True))

    @property
    def records(self) -> list[QueryRecord]:
        return [self.record(q) for q in self.queries]

    def target_vector(self, target: TimeSeries) -> np.ndarray:
        t = target.reindex(self.grid)
        if np.isnan(t).all():
            raise EmptyOverlapError("target does not overlap the corpus grid")
        return t

    def target_sketch(self, target_vec: np.ndarray) -> Optional[np.ndarray]:
        z, ok = kernels.unit_zscore_rows(target_vec[None, :])
        if not ok[0]:
            return None
        return _unit_rows(z @ self.projection)[0]

    # persistence -------------------------------------------------------

    def save(self, path) -> Path:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        _write_column(path / "values.col", self.values, b"f8  ")
        _write_column(path / "sketches.col", self.sketches, b"f8  ")
        _write_column(path / "sketchable.col", self.sketchable.astype(np.uint8)[:, None], b"u1  ")
        (path / "queries.json").write_text(
            json.dumps(list(self.queries), ensure_ascii=False, indent=0) + "\n", encoding="utf-8"
        )
        manifest = {
            "magic": MANIFEST_MAGIC,
            "format_version": FORMAT_VERSION,
            "country": self.country,
            "grid_start": self.grid.start_date.isoformat(),
            "n_weeks": self.grid.length,
            "d": self.d,
            "seed": self.seed,
            "record_count": len(self),
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "CorpusIndex":
        path = Path(path)
        mpath = path / "manifest.json"
        if not mpath.is_file():
            raise IndexFormatError(f"no index manifest at {mpath}")
        try:
            manifest = json.loads(mpath.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"corrupt manifest {mpath}: {exc}") from None
        if manifest.get("magic") != MANIFEST_MAGIC:
            raise IndexFormatError(f"{path} is not a correlate index")
        if manifest.get("format_version") != FORMAT_VERSION:
            raise IndexFormatError(
                f"index format version {manifest.get('format_version')} is not supported "
                f"(expected {FORMAT_VERSION})"
            )
        n = manifest["record_count"]
        grid = WeekGrid(dt.date.fromisoformat(manifest["grid_start"]), manifest["n_weeks"])
        values = _read_column(path / "values.col", (n, grid.length))
        sketches = _read_column(path / "sketches.col", (n, manifest["d"]))
        ok = _read_column(path / "sketchable.col", (n, 1))[:, 0].astype(bool)
        queries = json.loads((path / "queries.json").read_text(encoding="utf-8"))
        if len(queries) != n:
            raise IndexFormatError("queries.json does not match the manifest record count")
        return cls(manifest["country"], grid, queries, values, sketches, ok,
                   manifest["d"], manifest["seed"])


def _write_column(path: Path, arr: np.ndarray, code: bytes) -> None:
    arr = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(COLUMN_MAGIC, FORMAT_VERSION, code, arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def _read_column(path: Path, shape) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise IndexFormatError(f"missing index file {path}") from None
    if len(raw) < _HEADER.size:
        raise IndexFormatError(f"truncated index file {path}")
    magic, version, code, rows, cols = _HEADER.unpack_from(raw)
    if magic != COLUMN_MAGIC:
        raise IndexFormatError(f"bad magic in {path}")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{path} has format version {version}, expected {FORMAT_VERSION}")
    if code not in _DTYPES or (rows, cols) != tuple(shape):
        raise IndexFormatError(f"{path} holds {rows}x{cols} {code!r}, manifest says {shape}")
    dtype = _DTYPES[code]
    body = raw[_HEADER.size:]
    if len(body) != rows * cols * dtype.itemsize:
        raise IndexFormatError(f"size mismatch in {path}")
    return np.frombuffer(body, dtype=dtype).reshape(rows, cols).copy()


def build_index(records: Sequence[QueryRecord], d: int = DEFAULT_D, seed: int = 0) -> CorpusIndex:
    if not records:
        raise ValueError("cannot build an index from zero records")
    grid = records[0].series.grid
    country = records[0].country
    for rec in records[1:]:
        if rec.series.grid != grid:
            raise GridMismatchError(
                f"mixed grid anchors: {rec.query!r} starts {rec.series.grid.start_date} "
                f"({rec.series.grid.length} weeks), expected {grid.start_date} ({grid.length} weeks)"
            )
        if rec.country != country:
            raise ValueError(f"mixed countries in one index: {country} and {rec.country}")
    values = np.stack([rec.series.values for rec in records])
    return CorpusIndex.from_matrix(country, grid, [r.query for r in records], values, d=d, seed=seed)


def _score(values: np.ndarray, target: np.ndarray, workers: int = 1):
    if workers <= 1 or values.shape[0] < 2 * workers:
        return kernels.pearson_rows(values, target)
    bounds = np.linspace(0, values.shape[0], workers + 1).astype(int)
    parts = [(values[lo:hi], target) for lo, hi in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        out = list(pool.map(lambda a: kernels.pearson_rows(*a), parts))
    return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])


def _top_positions(scores: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m largest scores; boundary ties resolved by lower index."""
    if m >= scores.shape[0]:
        return np.arange(scores.shape[0])
    thr = np.partition(scores, -m)[-m]
    above = np.flatnonzero(scores > thr)
    tied = np.flatnonzero(scores == thr)
    return np.sort(np.concatenate([above, tied[: m - above.shape[0]]]))


def _rank(queries, rows: np.ndarray, r: np.ndarray, n: np.ndarray, k: int) -> list[RankedResult]:
    defined = ~np.isnan(r)
    rows, r, n = rows[defined], r[defined], n[defined]
    if r.shape[0] > k:
        thr = np.partition(r, -k)[-k]
        keep = r >= thr
        rows, r, n = rows[keep], r[keep], n[keep]
    order = sorted(range(r.shape[0]), key=lambda j: (-r[j], queries[rows[j]]))[:k]
    return [
        RankedResult(queries[rows[j]], CorrelationEstimate.from_r(float(r[j]), int(n[j]), 0), pos + 1)
        for pos, j in enumerate(order)
    ]


def search_exact(index: CorpusIndex, target: TimeSeries, k: int, workers: int = 1) -> list[RankedResult]:
    """Score every record at shift 0 and return the top ``k`` defined results."""
    if k < 1:
        raise ValueError("k must be >= 1")
    t = index.target_vector(target)
    r, n = _score(index.values, t, workers)
    if not n.any():
        raise EmptyOverlapError("target has an empty overlap with every record")
    return _rank(index.queries, np.arange(len(index)), r, n, k)


def search_approx(index: CorpusIndex, target: TimeSeries, k: int,
                  oversample: int = DEFAULT_OVERSAMPLE) -> list[RankedResult]:
    """Sketch dot-product shortlist of ``k * oversample`` records, exact rerank."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    t = index.target_vector(target)
    if not (~np.isnan(t) & index.coverage).any():
        raise EmptyOverlapError("target has an empty overlap with every record")
    st = index.target_sketch(t)
    if st is None:
        return []
    scores = index.sketches @ st
    scores[~index.sketchable] = -np.inf
    m = min(k * oversample, int(index.sketchable.sum()))
    if m == 0:
        return []
    cand = _top_positions(scores, m)
    r, n = kernels.pearson_rows(index.values[cand], t)
    return _rank(index.queries, cand, r, n, k)


def recall(approx: Sequence[RankedResult], exact: Sequence[RankedResult]) -> float:
    truth = {res.query for res in exact}
    if not truth:
        return 1.0
    return len(truth & {res.query for res in approx}) / len(truth)
