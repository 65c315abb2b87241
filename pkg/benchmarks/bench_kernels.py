"""Compare the numba and numpy kernels, and exhaustive vs sketch-pruned search.

    python benchmarks/bench_kernels.py                # 100k x 520
    python benchmarks/bench_kernels.py --records 20000 --repeat 5

Both kernel implementations are importable regardless of
CORRELATE_DISABLE_NUMBA; the flag only picks which one ``search_*`` uses.
"""
import argparse
import timeit

import numpy as np

from correlate import kernels
from correlate.index import CorpusIndex, recall, search_approx, search_exact
from correlate.series import make_week_grid
from correlate.synth import as_series, synthetic_corpus, synthetic_target


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--records", type=int, default=100_000)
    ap.add_argument("--weeks", type=int, default=520)
    ap.add_argument("--gaps", type=float, default=0.02, help="fraction of cells blanked")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--targets", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    values, topics = synthetic_corpus(args.records, args.weeks, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    values[rng.random(values.shape) < args.gaps] = np.nan
    target = synthetic_target(topics, seed=args.seed)
    print(f"corpus {args.records} x {args.weeks}, {args.gaps:.0%} gaps; search backend: {kernels.BACKEND}")

    kernels.pearson_rows_numba(values[:4], target)  # compile outside the timings
    kernels.unit_zscore_rows_numba(values[:4])
    r_nb, _ = kernels.pearson_rows_numba(values, target)
    r_np, _ = kernels.pearson_rows_numpy(values, target)
    agree = float(np.nanmax(np.abs(r_nb - r_np)))
    rows = [
        ("pearson_rows", lambda: kernels.pearson_rows_numba(values, target),
         lambda: kernels.pearson_rows_numpy(values, target)),
        ("unit_zscore_rows", lambda: kernels.unit_zscore_rows_numba(values),
         lambda: kernels.unit_zscore_rows_numpy(values)),
    ]
    print(f"\n{'kernel':<18}{'numba s':>10}{'numpy s':>10}{'ratio':>8}")
    for name, nb, npy in rows:
        t_nb, t_np = best_of(nb, args.repeat), best_of(npy, args.repeat)
        print(f"{name:<18}{t_nb:>10.3f}{t_np:>10.3f}{t_np / t_nb:>7.1f}x")
    print(f"max |r_numba - r_numpy| = {agree:.1e}")

    grid = make_week_grid("2004-01-04", args.weeks)
    index = CorpusIndex.from_matrix("XX", grid, [f"q{i:07d}" for i in range(args.records)], values)
    targets = [as_series(synthetic_target(topics, seed=100 + j)) for j in range(args.targets)]
    search_exact(index, targets[0], 20)
    t_exact = t_approx = 0.0
    recalls = []
    for t in targets:
        t_exact += best_of(lambda: search_exact(index, t, 20), args.repeat)
        t_approx += best_of(lambda: search_approx(index, t, 20), args.repeat)
        recalls.append(recall(search_approx(index, t, 20), search_exact(index, t, 20)))
    n = len(targets)
    print(f"\nsearch (k=20, oversample 10, d=32), mean over {n} targets")
    print(f"exact  {t_exact / n:.4f} s")
    print(f"approx {t_approx / n:.4f} s   speedup {t_exact / t_approx:.1f}x   recall {np.mean(recalls):.3f}")


if __name__ == "__main__":
    main()
