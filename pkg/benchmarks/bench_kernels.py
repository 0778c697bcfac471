"""Compare the compiled kd-tree kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 1000 4096 20000] [--queries 512] [--repeat 3]

For each cloud size the script times index construction, a batch of nearest
queries and a batch of radius queries on both backends, checks that the two
return identical answers, and prints the speed-up.
"""
import argparse
import time

import numpy as np

from degenfuse.spatial import BACKENDS, SpatialIndex


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench(n, n_queries, radius, repeat, rng):
    pts = rng.uniform(-30, 30, size=(n, 3))
    queries = rng.uniform(-30, 30, size=(n_queries, 3))
    rows = {}
    answers = {}
    for name in sorted(BACKENDS):
        t_build, idx = best_of(lambda: SpatialIndex(pts, backend=name), repeat)
        t_nn, nn = best_of(lambda: idx.query_nearest(queries), repeat)
        t_rad, rad = best_of(lambda: idx.query_radius(queries, radius), repeat)
        rows[name] = (t_build, t_nn, t_rad)
        answers[name] = (nn, rad)
    ref = answers["python"]
    for name, (nn, rad) in answers.items():
        same = np.array_equal(nn[0], ref[0][0]) and np.allclose(nn[1], ref[0][1], rtol=1e-12) \
            and all(np.array_equal(a, b) for a, b in zip(rad[:2], ref[1][:2]))
        if not same:
            raise SystemExit(f"backend {name} disagrees with python at n={n}")
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 4096, 20000])
    ap.add_argument("--queries", type=int, default=512)
    ap.add_argument("--radius", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    names = sorted(BACKENDS)
    if "compiled" not in names:
        print("compiled kernel not importable; timing the python backend only")
    header = f"{'n':>7} {'backend':>9} {'build ms':>10} {'nearest ms':>11} {'radius ms':>10}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        rows = bench(n, args.queries, args.radius, args.repeat, rng)
        for name in names:
            b, q, r = (1e3 * v for v in rows[name])
            print(f"{n:>7} {name:>9} {b:>10.2f} {q:>11.2f} {r:>10.2f}")
        if "compiled" in rows:
            py, c = rows["python"], rows["compiled"]
            print(f"{'':>7} {'speed-up':>9} {'':>10} {py[1] / c[1]:>10.0f}x {py[2] / c[2]:>9.0f}x")


if __name__ == "__main__":
    main()
