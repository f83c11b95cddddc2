"""Timing of the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--size 1000000]

Prints one row per kernel with the best-of-repeat wall time of each backend
and the speed-up. The last row times the q-chain harness under each backend
in a fresh interpreter, since the backend is fixed at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mlqueue import _kernels_py

try:
    from mlqueue import _ckernels
except ImportError:
    _ckernels = None


def cases(size):
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.normal(size=size))
    steps = np.where(rng.random(size) < 0.48, 1, -1).astype(np.int64)
    a = np.cumsum(rng.exponential(size=size))
    s = rng.exponential(0.9, size=size)
    xs = np.linspace(0.1, 50.0, 200)
    return {
        "regulator_values": lambda m: m.regulator_values(x, 0.0),
        "abs_walk": lambda m: m.abs_walk(steps, 0),
        "lindley_departures": lambda m: m.lindley_departures(a, s),
        "spectral_sum": lambda m: m.spectral_sum(xs, -20.0, 0.01, 4000, 0.7, 1.0, 1.0),
    }


E2E = ("import time; from mlqueue.scaling import embedded_chain_harness; t = time.perf_counter(); "
       "embedded_chain_harness('q', 0.5, (10000,), replications=2000); print(time.perf_counter() - t)")


def end_to_end(pure):
    env = dict(os.environ)
    env.pop("MLQUEUE_PURE", None)
    if pure:
        env["MLQUEUE_PURE"] = "1"
    out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=1_000_000)
    args = ap.parse_args(argv)
    print(f"{'kernel':<20s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speed-up':>9s}")
    for name, fn in cases(args.size).items():
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:<20s} {tp:10.4f} {'n/a':>11s} {'':>9s}")
            continue
        tc = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<20s} {tp:10.4f} {tc:11.4f} {tp / tc:8.1f}x")
    tp, tc = end_to_end(True), end_to_end(False)
    print(f"{'q-chain harness':<20s} {tp:10.4f} {tc:11.4f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
