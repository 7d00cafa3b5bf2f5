"""Timing comparison of the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--size N] [--repeat R]

The same comparison can be forced package-wide by setting
PRESSURE_LAB_DISABLE_NUMBA=1 before import; here both variants are called
directly so one process covers both paths.
"""

import argparse
import time

import numpy as np

from pressure_lab._kernels import (HAVE_NUMBA, pair_seminorm_numba,
                                   pair_seminorm_numpy, star_matvec_numba,
                                   star_matvec_numpy)


def _time(fn, *args, repeat=5):
    fn(*args)                                 # warm-up / JIT compile
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_star_matvec(n, repeat):
    rng = np.random.default_rng(0)
    p = rng.standard_normal((n, 2 * n))
    pole = 0.3
    cs = rng.random((n - 1, 2 * n)) + 0.5
    cp = rng.random(2 * n) + 0.5
    ct = rng.random((n, 2 * n)) + 0.5
    args = (p, pole, cs, cp, ct, True)
    t_np = _time(star_matvec_numpy, *args, repeat=repeat)
    rows = [("star_matvec", "numpy", t_np, 1.0)]
    if HAVE_NUMBA:
        t_nb = _time(star_matvec_numba, *args, repeat=repeat)
        out_np, pole_np = star_matvec_numpy(*args)
        out_nb, pole_nb = star_matvec_numba(*args)
        assert np.allclose(out_np, out_nb) and np.isclose(pole_np, pole_nb)
        rows.append(("star_matvec", "numba", t_nb, t_np / t_nb))
    return rows


def bench_pair_seminorm(n, repeat):
    rng = np.random.default_rng(1)
    npts = n * 2 * n
    values = rng.standard_normal(npts)
    n_pairs = 20 * npts
    idx_a = rng.integers(0, npts, n_pairs)
    idx_b = rng.integers(0, npts, n_pairs)
    inv = rng.random(n_pairs) + 0.5
    args = (values, idx_a, idx_b, inv)
    t_np = _time(pair_seminorm_numpy, *args, repeat=repeat)
    rows = [("pair_seminorm", "numpy", t_np, 1.0)]
    if HAVE_NUMBA:
        t_nb = _time(pair_seminorm_numba, *args, repeat=repeat)
        assert np.isclose(pair_seminorm_numpy(*args), pair_seminorm_numba(*args))
        rows.append(("pair_seminorm", "numba", t_nb, t_np / t_nb))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=256,
                    help="grid rows n (grid is n x 2n)")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not HAVE_NUMBA:
        print("numba unavailable or disabled; timing the numpy path only")
    rows = bench_star_matvec(args.size, args.repeat)
    rows += bench_pair_seminorm(args.size, args.repeat)
    print(f"{'kernel':<16}{'impl':<8}{'best (ms)':>12}{'speedup':>10}")
    for kernel, impl, t, speedup in rows:
        print(f"{kernel:<16}{impl:<8}{t * 1e3:>12.3f}{speedup:>10.2f}")


if __name__ == "__main__":
    main()
