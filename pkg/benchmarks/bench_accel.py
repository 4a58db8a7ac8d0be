"""Benchmark the compiled hot kernels against the pure-numpy fallback.

Runs the chain pair-sum and the vectorized dispersion evaluation on a
representative workload through both implementations in one process
(dispatch is bypassed so a single run covers both paths), checks that
they agree, and prints a timing table.

    python3 benchmarks/bench_accel.py [--n-radial N] [--n-directions M]
"""

import argparse
import time

import numpy as np

from causalfock import adiabatic as ad
from causalfock import accel
from causalfock.adiabatic import ChainSpec
from causalfock.backend import USE_NUMBA


def build_workload(spec):
    (p1, w1), (p2, w2) = ad._chain_grids(spec)
    e1 = np.sqrt(np.sum(p1 * p1, axis=1) + spec.mass ** 2)
    e2 = np.sqrt(np.sum(p2 * p2, axis=1) + spec.mass ** 2)
    x1, u2 = ad._spinor_tables((p1, p2), spec.mass, spec.nu, spec.branch)
    xi = ad.default_xi(spec)
    w1eff = w1 * xi(p1)
    w2eff = w2 * xi(p2)
    insertion = ad.chain_insertion(spec)
    dens = insertion.density
    eps_arr = np.asarray(spec.eps_grid)
    return (e1, p1, w1eff, x1, e2, p2, w2eff, u2, 1.0, -1.0, spec.k,
            eps_arr, dens._s, dens._w * dens._g,
            float(insertion.prefactor.real), insertion.alpha,
            np.zeros(1), spec.phi_width ** 2)


def timeit(fn, args, repeats):
    best = np.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return result, best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n-radial", type=int, default=64)
    parser.add_argument("--n-directions", type=int, default=12)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    spec = ChainSpec(n_radial=args.n_radial, n_directions=args.n_directions)
    work = build_workload(spec)
    n_pairs = len(work[0]) * len(work[4])
    print(f"chain pair-sum workload: {n_pairs:,} pairs x "
          f"{len(spec.eps_grid)} eps values")

    rows = []
    if USE_NUMBA:
        # warm the jit cache before timing
        accel._chain_sum_loops(*work)
        res_nb, t_nb = timeit(accel._chain_sum_loops, work, args.repeats)
        rows.append(("chain_sum", "numba", t_nb))
    else:
        res_nb, t_nb = None, None
        print("numba backend unavailable/disabled; timing numpy only")
    res_np, t_np = timeit(accel._chain_sum_numpy, work, args.repeats)
    rows.append(("chain_sum", "numpy", t_np))
    if res_nb is not None:
        agree = np.max(np.abs(res_nb - res_np)) / max(np.max(np.abs(res_np)),
                                                      1e-300)
        print(f"cross-path agreement (relative): {agree:.2e}")

    x = -np.abs(np.random.default_rng(0).standard_normal(400000)) - 0.01
    dens = ad.chain_insertion(spec).density
    dargs = (x, dens._s, dens._w * dens._g)
    if USE_NUMBA:
        accel._dispersion_offcut_loops(*dargs)
        dres_nb, dt_nb = timeit(accel._dispersion_offcut_loops, dargs,
                                args.repeats)
        rows.append(("dispersion_offcut", "numba", dt_nb))
    dres_np, dt_np = timeit(accel._dispersion_offcut_numpy, dargs,
                            args.repeats)
    rows.append(("dispersion_offcut", "numpy", dt_np))

    print()
    print(f"{'kernel':<20} {'path':<7} {'best time':>10}")
    for name, path, t in rows:
        print(f"{name:<20} {path:<7} {t:>9.3f}s")
    by_kernel = {}
    for name, path, t in rows:
        by_kernel.setdefault(name, {})[path] = t
    for name, times in by_kernel.items():
        if "numba" in times and "numpy" in times:
            print(f"{name}: numpy/numba speed ratio "
                  f"{times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
