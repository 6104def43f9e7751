"""Compare the compiled and portable execution paths on one workload.

Runs the same seeded stream on each available backend and times the full
run plus both regret ledgers. Reports the speedup and the largest relative
deviation between the backends' ledger totals.

Usage:
    python3 benchmarks/bench_backends.py [--horizon N] [--dim D]
        [--window W] [--alpha A] [--repeats K]
"""

import argparse
import time

from dynreg import (
    GAUSSIAN,
    InnerAdaptConfig,
    NoiseModel,
    dlr_cumulative,
    make_config_adagrad,
    make_drifting_sine_stream,
    run_stream,
    slr_cumulative,
)
from dynreg.backends import HAS_NUMBA


def one_pass(backend, horizon, dim, window, alpha, seed=0):
    stream = make_drifting_sine_stream(
        dim=dim, drift_rate=0.05, noise=NoiseModel(GAUSSIAN, sigma=0.5), seed=seed
    )
    inner = InnerAdaptConfig(theta=0.05)
    opt = make_config_adagrad(eta=0.1, alpha=alpha, window=window)
    t0 = time.perf_counter()
    trace = run_stream(stream, horizon, inner, opt, seed=seed, backend=backend)
    dlr = dlr_cumulative(trace, window, alpha, backend=backend)
    slr = slr_cumulative(trace, window, backend=backend)
    elapsed = time.perf_counter() - t0
    return elapsed, dlr.total, slr.total


def bench(backend, args):
    one_pass(backend, min(64, args.horizon), args.dim, args.window, args.alpha)  # warmup
    best = None
    totals = None
    for _ in range(args.repeats):
        elapsed, dlr_total, slr_total = one_pass(
            backend, args.horizon, args.dim, args.window, args.alpha
        )
        if best is None or elapsed < best:
            best = elapsed
        totals = (dlr_total, slr_total)
    return best, totals


def rel_dev(a, b):
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def main():
    ap = argparse.ArgumentParser(
        description="Time the run and ledger paths on each available backend."
    )
    ap.add_argument("--horizon", type=int, default=20_000)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--window", type=int, default=64)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    print(
        f"workload: horizon={args.horizon} dim={args.dim} "
        f"window={args.window} alpha={args.alpha} repeats={args.repeats}"
    )
    numpy_best, numpy_totals = bench("numpy", args)
    print(f"numpy : best {numpy_best:8.3f}s  dlr={numpy_totals[0]:.6g} slr={numpy_totals[1]:.6g}")
    if not HAS_NUMBA:
        print("numba : not installed; skipping the compiled backend")
        return
    numba_best, numba_totals = bench("numba", args)
    print(f"numba : best {numba_best:8.3f}s  dlr={numba_totals[0]:.6g} slr={numba_totals[1]:.6g}")
    print(f"speedup: {numpy_best / numba_best:.2f}x")
    worst = max(
        rel_dev(numpy_totals[0], numba_totals[0]),
        rel_dev(numpy_totals[1], numba_totals[1]),
    )
    print(f"largest relative deviation between backends: {worst:.3g}")


if __name__ == "__main__":
    main()
