"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --repeat 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from parm import build_market_program, kernels, make_economy, maximize_concave_qp
from parm.lp import LinearProgram, SimplexSolver


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bellman_case(states: int, actions: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    R = rng.uniform(-1, 1, (states, actions))
    P = rng.uniform(0, 1, (states, actions, states))
    P /= P.sum(axis=2, keepdims=True)

    def run(mod):
        v = np.zeros(states)
        mod.bellman_sweeps(R, P, 0.99, v, 1e-10, 10**6)

    return run


def simplex_case(rows: int, cols: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    lp = LinearProgram(rng.normal(size=cols), A_ub=rng.uniform(0, 1, (rows, cols)), b_ub=np.ones(rows))

    def run(mod):
        kernels._impl = mod
        SimplexSolver(lp).maximize(lp.c)

    return run


def market_case(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    e = make_economy(rng.uniform(100, 1000, n), rng.dirichlet(np.ones(n), n),
                     rng.uniform(50, 500, n), idio_frac=0.3)
    qp = build_market_program(e, ic_constraint=True)

    def run(mod):
        kernels._impl = mod
        maximize_concave_qp(qp)

    return run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    try:
        compiled = kernels.backend("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    python = kernels.backend("python")
    active = kernels._impl
    cases = [
        ("bellman 32 states x 5 actions", bellman_case(32, 5)),
        ("bellman 128 states x 9 actions", bellman_case(128, 9)),
        ("simplex 40 x 60", simplex_case(40, 60)),
        ("simplex 120 x 200", simplex_case(120, 200)),
        ("market program n=3", market_case(3)),
        ("market program n=5", market_case(5)),
    ]
    print(f"{'case':34s} {'compiled [ms]':>14s} {'python [ms]':>12s} {'speedup':>8s}")
    try:
        for name, run in cases:
            tc = best_of(lambda: run(compiled), args.repeat)
            tp = best_of(lambda: run(python), args.repeat)
            print(f"{name:34s} {1e3 * tc:14.2f} {1e3 * tp:12.2f} {tp / tc:7.1f}x")
    finally:
        kernels._impl = active
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
