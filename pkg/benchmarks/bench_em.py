"""Compiled vs numpy Euler-Maruyama kernel on the 1D and 2D double wells.

    python benchmarks/bench_em.py [--paths N] [--steps S] [--repeat R]

Prints steps/second per backend and checks that both end in the same state.
"""
import argparse
import time

import numpy as np

from kramers import analyze, resolve_potential
from kramers.sim.backend import DriftProgram, available_backends, run_paths
from kramers.sim.engine import WellSet
from kramers.sim.rng import path_generators


def bench(name, n_paths, n_steps, repeat, eps=0.25, dt=1e-3):
    g = analyze(resolve_potential(name))
    prog = DriftProgram.from_spec(g.spec)
    table = WellSet(g).table()
    x0 = np.tile(g.point(g.minima_ids[0]).x, (n_paths, 1))
    rows, finals = [], {}
    for backend in available_backends():
        best = np.inf
        for _ in range(repeat):
            X = x0.copy()
            gens = path_generators(7, n_paths)
            t0 = time.perf_counter()
            run_paths(gens, X, n_steps, dt, np.sqrt(2 * eps * dt), prog, table, backend=backend)
            best = min(best, time.perf_counter() - t0)
        finals[backend] = X
        rows.append((backend, best, n_paths * n_steps / best))
    same = len(finals) < 2 or np.array_equal(finals["cython"], finals["python"])
    base = dict((b, t) for b, t, _ in rows).get("python")
    for backend, t, rate in rows:
        speed = f"{base / t:6.1f}x" if base else ""
        print(f"{name:14s} {backend:7s} {t:8.3f} s {rate:12.3e} steps/s {speed}")
    print(f"{name:14s} identical final states: {same}")
    return same


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=64)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    ok = [bench(n, a.paths, a.steps, a.repeat) for n in ("doublewell1d", "doublewell2d")]
    raise SystemExit(0 if all(ok) else 1)


if __name__ == "__main__":
    main()
