"""Timing of the trajectory kernels: numba against numpy, and thread scaling.

Run with ``python3 benchmarks/bench_kernels.py``.
"""

import argparse
import time

import numpy as np

from sqw import _kernels
from sqw.graph_core import t3_graph, torus_graph
from sqw.open_walk import random_state, sample_trajectories
from sqw.scattering import haar_family


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trajectories", type=int, default=20000)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    for name, g in (("t3", t3_graph()), ("torus 4x4", torus_graph([4, 4]))):
        f = haar_family(g, 0)
        dim = int(g.degrees.sum())
        rho = random_state(dim, np.random.default_rng(0))
        # Warm up the jit cache before timing.
        sample_trajectories(g, f, rho, 2, 10, seed=0)
        for backend in backends:
            for workers in (1, 4):
                t = _time(
                    lambda: sample_trajectories(g, f, rho, args.steps, args.trajectories, 1, workers=workers, backend=backend),
                    args.repeat,
                )
                rate = args.trajectories * args.steps / t
                print(f"{name:10s} {backend:6s} workers={workers}  {t:8.3f} s  {rate:12.0f} steps/s")


if __name__ == "__main__":
    main()
