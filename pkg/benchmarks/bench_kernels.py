"""Time the compiled and pure-Python kernels on solver-sized inputs.

    python benchmarks/bench_kernels.py [--nx 64] [--nv 128] [--repeat 20]

Also times one full nonlinear step with each backend and checks that both
backends return identical arrays.
"""
import argparse
import time

import numpy as np

from vfp import kernels
from vfp.grid import build_grid, sample_function
from vfp.regularize import build_mollifier
from vfp.solver import SolverConfig, step_nonlinear


def _time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(nx, nv):
    rng = np.random.default_rng(0)
    lines = nx * nv
    lower = -rng.random((lines, nv))
    upper = -rng.random((lines, nv))
    diag = 1.0 + np.abs(lower) + np.abs(upper)
    rhs = rng.random((lines, nv))
    rows = rng.random((nv, nx))
    shift = rng.uniform(-3, 3, nv)
    grid = build_grid(1, nx, nv, 8.0)
    kern = build_mollifier(grid, 0.1)
    fields = rng.random((4, nx))
    f0 = sample_function(grid, lambda x, v: (1 + 0.5 * np.sin(2 * np.pi * x)) * np.exp(-v ** 2 / 2))
    cfg = SolverConfig(grid=grid, t_end=1.0)
    return {
        "tridiag_solve": lambda: kernels.tridiag_solve(lower, diag, upper, rhs),
        "shift_rows": lambda: kernels.shift_rows(rows, shift),
        "periodic_convolve": lambda: kernels.periodic_convolve(fields, kern.offsets, kern.weights),
        "step_nonlinear": lambda: step_nonlinear(f0, cfg).values,
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=64)
    ap.add_argument("--nv", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)}  threads: {kernels.thread_count()}")
    print(f"{'kernel':<18} " + " ".join(f"{b:>12}" for b in backends) + "   speedup  identical")
    # speedup = first backend time / last backend time (python / compiled)
    for name, fn in cases(args.nx, args.nv).items():
        times, results = [], []
        for b in backends:
            prev = kernels.use_backend(b)
            try:
                times.append(_time(fn, args.repeat))
                results.append(np.asarray(fn()))
            finally:
                kernels.use_backend(prev)
        same = all(np.array_equal(results[0], r) for r in results[1:])
        speed = times[0] / times[-1] if len(times) == 2 else 1.0
        print(f"{name:<18} " + " ".join(f"{t * 1e3:>10.3f}ms" for t in times) + f"   {speed:7.2f}x  {same}")


if __name__ == "__main__":
    main()
