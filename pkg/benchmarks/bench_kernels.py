"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 2000] [--dim 784] [--repeat 3]

Times ``pairwise_tile`` for each metric, ``class_nearest`` and the full
blocked distance-statistics pass, checks that both backends return the
same numbers, and prints one row per (kernel, backend).
"""

import argparse
import time

import numpy as np

from genacc import kernels
from genacc.analysis import distance_stats
from genacc.datasets import make_synthetic_images


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--dim", type=int, default=784)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--threads", type=int, default=kernels.default_threads())
    args = p.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy backend is timed")
    ds = make_synthetic_images(args.n, args.dim, 10, seed=0)
    X = ds.integer_points()
    Q = X[: args.n // 4]
    print(f"n={args.n} dim={args.dim} threads={args.threads}")
    print(f"{'kernel':<22}{'backend':<9}{'seconds':>10}{'speedup':>9}")
    rows = []
    for label, make in [
        ("pairwise L1", lambda b: lambda: kernels.pairwise(Q, X, 0, b, args.threads)),
        ("pairwise L2", lambda b: lambda: kernels.pairwise(Q, X, 1, b, args.threads)),
        ("pairwise LINF", lambda b: lambda: kernels.pairwise(Q, X, 2, b, args.threads)),
        ("class_nearest LINF", lambda b: lambda: kernels.class_nearest(
            Q, X, ds.label_index(), ds.num_classes, 2, b, args.threads)),
        ("distance_stats LINF", lambda b: lambda: distance_stats(
            ds, "linf", backend=b, threads=args.threads).d_diff),
    ]:
        results = {}
        for b in backends:
            results[b] = _best(make(b), args.repeat)
        ref = results["python"][0]
        outs = [np.asarray(v[1]) for v in results.values()]
        same = all(np.array_equal(outs[0], o) for o in outs[1:])
        for b, (t, _) in results.items():
            rows.append((label, b, t, ref / t))
            print(f"{label:<22}{b:<9}{t:>10.4f}{ref / t:>8.1f}x" + ("" if same else "  MISMATCH"))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
