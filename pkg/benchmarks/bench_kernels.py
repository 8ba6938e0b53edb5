"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call compiles (or loads the on-disk cache); that warm-up is
reported separately and excluded from the per-call timings.
"""

import argparse
import time

import numpy as np

from shredkit.kernels import _numba, _numpy


def make_inputs(rng):
    vsize, nrows = 2000, 5000
    unigram = rng.integers(0, 50, vsize).astype(np.float64)
    lengths = rng.integers(1, 40, nrows)
    indptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    ids = np.concatenate([np.sort(rng.choice(vsize, k, replace=False)) for k in lengths]).astype(np.int64)
    counts = rng.integers(1, 20, ids.size).astype(np.float64)
    totals = np.add.reduceat(counts, indptr[:-1])
    rows = rng.integers(-1, nrows, 3).astype(np.int64)
    return {
        "midranks": (rng.integers(0, 200, 20_000).astype(np.float64),),
        "inscale_counts": (rng.integers(0, 30, 12).astype(np.float64),
                           rng.integers(0, 2, (24, 12)).astype(np.float64)),
        "backoff_scores": (unigram, 0.01, rows, indptr, ids, counts, totals, 0.4),
        "nb_log_joint": (rng.integers(0, vsize, 3000),
                         np.log(rng.dirichlet(np.ones(vsize), 4)), np.log(np.full(4, 0.25))),
    }


def per_call(fn, args, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inputs = make_inputs(np.random.default_rng(args.seed))
    print(f"{'kernel':<16}{'warm-up':>12}{'numpy/call':>14}{'numba/call':>14}{'speedup':>10}")
    for name, fargs in inputs.items():
        fast, slow = getattr(_numba, name), getattr(_numpy, name)
        t0 = time.perf_counter()
        a = fast(*fargs)
        warm = time.perf_counter() - t0
        b = slow(*fargs)
        # both backends must agree before timing means anything
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.allclose(x, y, rtol=1e-12), name
        t_np = per_call(slow, fargs, args.repeat)
        t_nb = per_call(fast, fargs, args.repeat)
        print(f"{name:<16}{warm * 1e3:>10.1f}ms{t_np * 1e6:>12.1f}us{t_nb * 1e6:>12.1f}us{t_np / t_nb:>9.2f}x")


if __name__ == "__main__":
    main()
