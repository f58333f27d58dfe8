"""Compare the compiled and numpy neighbour-averaging kernels.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--full]

The per-call table times one consensus phase (average until the spread is
below tolerance) on ring graphs of several sizes. ``--full`` also times a
complete distributed run of the built-in case on each backend.
"""

import argparse
import time
from unittest import mock

import numpy as np

from consensus_ed import kernels
from consensus_ed.engine import run
from consensus_ed.graph import CommGraph, build_weights
from consensus_ed.scenario import builtin_case1, generate_random


def _best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_phase(n, repeat, tol=1e-6):
    w = build_weights(CommGraph.ring(range(n)))
    x = np.random.default_rng(n).normal(0.0, 100.0, n)
    args = (w.indptr, w.indices, w.data, x, tol, 10_000_000)
    t_py, (y_py, r_py) = _best_of(lambda: kernels.average_rounds_py(*args), repeat)
    if kernels.average_rounds_ext is None:
        return n, r_py, t_py, None, None
    t_c, (y_c, r_c) = _best_of(lambda: kernels.average_rounds_ext(*args), repeat)
    assert r_c == r_py and np.allclose(y_c, y_py, rtol=0, atol=1e-12)
    return n, r_py, t_py, t_c, float(np.abs(y_c - y_py).max())


def bench_run(scenario, fn):
    with mock.patch.object(kernels, "average_rounds", fn):
        t0 = time.perf_counter()
        sol, _ = run(scenario)
        return time.perf_counter() - t0, sol


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--full", action="store_true", help="also time whole runs")
    args = ap.parse_args()

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'ring n':>7}{'rounds':>10}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>9}{'max diff':>10}")
    for n in (10, 50, 100, 200):
        n, rounds, t_py, t_c, diff = bench_phase(n, args.repeat)
        if t_c is None:
            print(f"{n:>7}{rounds:>10}{t_py:>12.4f}{'-':>12}{'-':>9}{'-':>10}")
        else:
            print(f"{n:>7}{rounds:>10}{t_py:>12.4f}{t_c:>12.4f}{t_py / t_c:>8.1f}x{diff:>10.1e}")

    if args.full and kernels.average_rounds_ext is not None:
        print()
        print(f"{'scenario':<22}{'numpy [s]':>12}{'cython [s]':>12}{'iterations':>12}")
        for name, s in (("case1", builtin_case1()), ("generated 150/200", generate_random(150, 200, 42))):
            t_py, a = bench_run(s, kernels.average_rounds_py)
            t_c, b = bench_run(s, kernels.average_rounds_ext)
            assert a.iterations_used == b.iterations_used
            print(f"{name:<22}{t_py:>12.3f}{t_c:>12.3f}{a.iterations_used:>12}")


if __name__ == "__main__":
    main()
