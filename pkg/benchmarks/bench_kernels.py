"""Time the hot kernels with and without the numba fast path.

Runs itself twice as a subprocess, once with PIDESIGN_DISABLE_NUMBA=1 and
once without, then prints a side-by-side table. Each workload is warmed up
before timing so jit compilation does not leak into the numbers.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _region():
    from pidesign import default_model
    from pidesign.geometry import region_for
    from pidesign.problems import load_builtin

    return region_for(default_model(load_builtin("heat_exchanger")))


def bench_bcls(repeat: int) -> float:
    """Zonotope membership for a batch of log-pi points via backsolve."""
    region = _region()
    rng = np.random.default_rng(7)
    Z = rng.uniform(-1.0, 1.0, size=(20_000, region.q))
    region.backsolve(Z[:64], scaled=True)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        region.backsolve(Z, scaled=True)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_monomials(repeat: int) -> float:
    """Cubic monomial basis on 200k rows of 5 factors."""
    from pidesign.models import full_poly

    model = full_poly(3, 5)
    rng = np.random.default_rng(7)
    Z = rng.uniform(-1.0, 1.0, size=(200_000, 5))
    model.features(Z[:64])
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        model.features(Z)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_exchange(repeat: int) -> float:
    """Coordinate exchange, quadratic model, n=20, one start."""
    from pidesign.designs import WeightedModel, coordinate_exchange
    from pidesign.models import full_poly, moment_matrix

    region = _region()
    model = full_poly(2, region.q, name="phi1", map_kind="pi")
    mhat = moment_matrix(model, region, n=2_000, seed=7)
    wm = WeightedModel(model, mhat, 1.0)
    coordinate_exchange(region, [wm], 21, seed=7, n_starts=1, max_sweeps=2)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        coordinate_exchange(region, [wm], 21, seed=7, n_starts=1, max_sweeps=6)
        best = min(best, time.perf_counter() - t0)
    return best


WORKLOADS = {
    "bcls_batch (20k points)": bench_bcls,
    "monomials (200k x 56)": bench_monomials,
    "exchange sweep (n=21)": bench_exchange,
}


def run_worker(repeat: int) -> None:
    from pidesign import kernels

    out = {"numba": kernels.USING_NUMBA}
    for name, fn in WORKLOADS.items():
        out[name] = fn(repeat)
    print(json.dumps(out))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3,
                    help="timed repetitions per workload, best is kept")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        run_worker(args.repeat)
        return 0

    results = {}
    for label, disable in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, PIDESIGN_DISABLE_NUMBA=disable)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--worker", "--repeat", str(args.repeat)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        results[label] = json.loads(proc.stdout.strip().splitlines()[-1])

    if not results["numba"].pop("numba"):
        print("note: numba unavailable, both columns use the numpy fallback")
    results["numpy"].pop("numba")
    width = max(len(k) for k in WORKLOADS)
    print(f"{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name in WORKLOADS:
        a, b = results["numba"][name], results["numpy"][name]
        print(f"{name:<{width}}  {a:>9.4f}s  {b:>9.4f}s  {b / a:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
