#!/usr/bin/env python3
"""Time the two implementations of each hot kernel.

Runs the numba-compiled and pure-numpy variants of the L1 coordinate
descent solve and the boosted-tree split scan on identical inputs and
prints a speedup table. Sizes roughly match pipeline workloads.

    python3 benchmarks/bench_kernels.py [--repeats N]

The numpy variants are the ones selected at import time when numba is
missing or RISKFORGE_DISABLE_NUMBA=1 is set.
"""

import argparse
import time

import numpy as np

from riskforge import _kernels as K


def bench(fn, args, repeats, prepare=None):
    best = np.inf
    for _ in range(repeats):
        a = prepare() if prepare else args
        t0 = time.perf_counter()
        fn(*a)
        best = min(best, time.perf_counter() - t0)
    return best


def lasso_case(n, p, lam, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X = np.ascontiguousarray((X - X.mean(0)) / X.std(0))
    beta = rng.standard_normal(p) * (rng.uniform(size=p) < 0.3)
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-(X @ beta)))).astype(float)
    return X, y, lam


def split_case(n, seed=0):
    rng = np.random.default_rng(seed)
    vals = np.sort(rng.standard_normal(n))
    g = rng.standard_normal(n)
    h = np.abs(rng.standard_normal(n)) * 0.2 + 0.05
    return vals, g, h, 0.0, 0.0, 1.0, 0.0


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not K._HAVE_NUMBA:
        print("numba not installed; only the numpy path is available")
        return

    # compile outside the timed region
    K._lasso_cd_nb(*lasso_case(50, 4, 0.05),
                   0.0, np.zeros(4), 200, 1e-7, 1e6)
    K._split_scan_nb(*split_case(64))

    rows = []
    for n, p, lam in ((500, 20, 0.02), (1000, 80, 0.01), (800, 300, 0.005)):
        X, y, lam = lasso_case(n, p, lam)

        def run(fn):
            def prepare():
                return (X, y, lam, 0.0, np.zeros(p), 100_000, 1e-7, 1e6)
            return bench(fn, None, args.repeats, prepare)

        t_nb = run(K._lasso_cd_nb)
        t_py = run(K._lasso_cd_py)
        rows.append((f"lasso_cd n={n} p={p}", t_nb, t_py))

    for n in (1_000, 20_000, 200_000):
        case = split_case(n)
        t_nb = bench(K._split_scan_nb, case, args.repeats)
        t_py = bench(K._split_scan_py, case, args.repeats)
        rows.append((f"split_scan n={n}", t_nb, t_py))

    print(f"{'kernel':28s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, t_nb, t_py in rows:
        print(f"{name:28s} {t_nb * 1e3:9.2f}ms {t_py * 1e3:9.2f}ms "
              f"{t_py / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
