"""Benchmark: compiled grid kernel versus the pure-numpy lane.

Times the Gram-form grid scan that backs the V[rho]-emptiness oracle and
the witness epsilon cross-check, on the shifts-state constraint tensors
(N = 2) and on a 2x2x3 mixture (N = 3).

Run:  python benchmarks/bench_scan.py [--step 0.05]
"""
import argparse
import time

import numpy as np

from trisep import scan, states
from trisep.productfind import assemble_constraints


def time_lane(t, flags, grid, force_numpy, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        vals = scan.min_gram_grid(t, flags, grid, grid, force_numpy=force_numpy)
        best = min(best, time.perf_counter() - t0)
    return best, vals


def bench(name, state, step):
    kd = assemble_constraints(state)
    t, flags = kd.gram_tensors((0, 0))
    ax = scan.chart_axis(1.05, step)
    grid = (ax[:, None] + 1j * ax[None, :]).ravel()
    npts = len(grid) ** 2
    t_np, v_np = time_lane(t, flags, grid, force_numpy=True)
    print(f"{name}: {npts/1e6:.2f} Mpoints, numpy lane   "
          f"{t_np:.3f}s ({npts/t_np/1e6:.1f} Mpts/s)")
    if scan.HAVE_EXT:
        t_cy, v_cy = time_lane(t, flags, grid, force_numpy=False)
        diff = float(np.abs(v_np - v_cy).max())
        print(f"{name}: {npts/1e6:.2f} Mpoints, cython lane  "
              f"{t_cy:.3f}s ({npts/t_cy/1e6:.1f} Mpts/s), "
              f"speedup x{t_np/t_cy:.1f}, max lane diff {diff:.1e}")
    else:
        print(f"{name}: compiled lane unavailable (numpy fallback active)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--step", type=float, default=0.05)
    args = ap.parse_args()
    print(f"scan backend: {scan.backend(2)} (extension built: {scan.HAVE_EXT})")
    bench("shifts (N=2)", states.shifts_upb_state(), args.step)
    st, _ = states.random_separable_state((2, 2, 3), 6, seed=0)
    bench("mixture (N=3)", st, args.step)


if __name__ == "__main__":
    main()
