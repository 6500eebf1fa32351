"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Runs kernel_matrix and kernel_matrix_grad for the three loop-heavy families
under FEDGP_BACKEND=numpy and FEDGP_BACKEND=numba (if available) and prints
median wall times plus the speedup. The flag is read at call time, so both
backends are timed inside one process; the numba path is warmed up first so
JIT compilation is not counted.

Usage:
    python3 benchmarks/bench_kernels.py [--n 500] [--dim 5] [--repeats 7]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from fedgp.kernels import (
    ard_se,
    available_backends,
    kernel_matrix,
    kernel_matrix_grad,
    neural_net,
    numba_import_error,
    periodic,
)

ENV_VAR = "FEDGP_BACKEND"


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def _cases(n: int, dim: int, seed: int):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    t = np.sort(rng.uniform(0.0, 100.0, size=n)).reshape(-1, 1)
    return [
        ("ARD_SE", ard_se(dim), np.zeros(dim + 1), X),
        ("PERIODIC", periodic(1), np.array([0.0, 0.0, np.log(24.0)]), t),
        ("NEURAL_NET", neural_net(dim), np.zeros(dim + 1), X),
    ]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500, help="number of input rows")
    ap.add_argument("--dim", type=int, default=5, help="input dimension")
    ap.add_argument("--repeats", type=int, default=7, help="timed repeats (median)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = list(available_backends())
    if "numba" not in backends:
        print(f"numba backend unavailable ({numba_import_error()}); timing numpy only")

    cases = _cases(args.n, args.dim, args.seed)
    saved = os.environ.get(ENV_VAR)

    # warm-up: compile every numba kernel once outside the timed region
    if "numba" in backends:
        os.environ[ENV_VAR] = "numba"
        for _, spec, params, X in cases:
            kernel_matrix(spec, params, X[:4])
            kernel_matrix_grad(spec, params, X[:4])

    results = {}
    try:
        for backend in backends:
            os.environ[ENV_VAR] = backend
            for name, spec, params, X in cases:
                results[(name, backend, "matrix")] = _median_time(
                    lambda: kernel_matrix(spec, params, X), args.repeats)
                results[(name, backend, "grads")] = _median_time(
                    lambda: kernel_matrix_grad(spec, params, X), args.repeats)
    finally:
        if saved is None:
            os.environ.pop(ENV_VAR, None)
        else:
            os.environ[ENV_VAR] = saved

    print(f"n={args.n} dim={args.dim} repeats={args.repeats} (median seconds)")
    header = f"{'family':<12} {'op':<8} {'numpy':>10}"
    if "numba" in backends:
        header += f" {'numba':>10} {'speedup':>8}"
    print(header)
    for name, _, _, _ in cases:
        for op in ("matrix", "grads"):
            t_np = results[(name, "numpy", op)]
            line = f"{name:<12} {op:<8} {t_np:>10.5f}"
            if "numba" in backends:
                t_nb = results[(name, "numba", op)]
                line += f" {t_nb:>10.5f} {t_np / t_nb:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()
