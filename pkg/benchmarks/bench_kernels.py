"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Each kernel runs on identical inputs under both backends; the table lists the
best wall time of ``--repeat`` runs and the speed-up. The two outputs are
compared too, so a mismatch shows up next to the timing.
"""

import argparse
import time

import numpy as np

from cdhoc import kernels


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def cases(scale, rng):
    n = max(10, int(400 * scale))
    a, b = rng.normal(size=n), rng.normal(size=n)
    yield f"dtw {n}x{n}", lambda k: k.dtw(a, b)[0]

    m = max(100, int(4032 * scale))
    xs = np.arange(m, dtype=np.float64)
    ys = 500 + 50 * np.sin(2 * np.pi * xs / 288) + rng.normal(0, 5, m)
    rw = rng.uniform(0.2, 1.0, m)
    yield f"loess n={m} span=433", lambda k: k.loess(xs, ys, xs, 433, 1, rw)[0]

    drive = rng.normal(size=max(100, int(200_000 * scale)))
    yield f"linear_recursion n={len(drive)}", lambda k: k.linear_recursion(0.97, 400.0, drive)

    rows = max(100, int(4000 * scale))
    X = np.ascontiguousarray(rng.normal(size=(rows, 4)))
    y = X @ np.array([0.5, -0.2, 0.1, 0.3]) + rng.normal(0, 0.1, rows)
    order = rng.permutation(rows).astype(np.int64)

    def epoch(k):
        w, acc = np.zeros(4), np.zeros(5)
        bias = k.svr_epoch(X, y, w, 0.0, order, 0.01, 0.05, 1.0, 1.0 / rows, acc)
        return np.append(w, [bias, *acc])

    yield f"svr_epoch {rows}x4", epoch


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply every problem size")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        ap.error("the compiled extension is not built; run `pip install --no-build-isolation -e .`")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<32}{'cython s':>12}{'python s':>12}{'speed-up':>10}  outputs")
    for name, run in cases(args.scale, rng):
        t_c, out_c = best_time(lambda: run(kernels.compiled), args.repeat)
        t_p, out_p = best_time(lambda: run(kernels.fallback), args.repeat)
        same = "agree" if np.allclose(out_c, out_p, rtol=1e-9, atol=1e-9) else "DIFFER"
        print(f"{name:<32}{t_c:>12.5f}{t_p:>12.5f}{t_p / t_c:>9.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
