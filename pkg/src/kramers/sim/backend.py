"""Backend selection for the Euler-Maruyama loop.

The compiled kernel is used when it imports; ``KRAMERS_BACKEND=python``
forces the numpy fallback.  Both consume the per-path streams identically.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

__all__ = ["DriftProgram", "WellTable", "available_backends", "default_backend", "run_paths"]

_EVENT_CAP = 256


@dataclass
class DriftProgram:
    """Flattened polynomial drift b and potential U (raw, unshifted) for the kernels."""
    dim: int
    coef: np.ndarray
    exps: np.ndarray
    comp: np.ndarray
    ucoef: np.ndarray
    uexps: np.ndarray
    maxp: int

    @classmethod
    def from_spec(cls, spec, drift_polys=None):
        polys = spec.drift_polys() if drift_polys is None else drift_polys
        coef, exps, comp = [], [], []
        for j, p in enumerate(polys):
            coef.extend(p.coeffs.tolist())
            exps.extend(p.exponents.tolist())
            comp.extend([j] * len(p.coeffs))
        d = spec.dim
        exps = np.array(exps, dtype=np.int32).reshape(-1, d)
        uexps = np.ascontiguousarray(spec.poly.exponents, dtype=np.int32).reshape(-1, d)
        maxp = int(max(exps.max(initial=0), uexps.max(initial=0), 1))
        return cls(d, np.array(coef, dtype=float), exps, np.array(comp, dtype=np.int32),
                   np.ascontiguousarray(spec.poly.coeffs, dtype=float), uexps, maxp)


@dataclass
class WellTable:
    """Well k = {raw U <= uthr[k]} intersected with the closed ball (centers[k], sqrt(rho2[k]))."""
    ids: list
    centers: np.ndarray
    rho2: np.ndarray
    uthr: np.ndarray

    @classmethod
    def empty(cls, d):
        return cls([], np.zeros((0, d)), np.zeros(0), np.zeros(0))


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def default_backend():
    want = os.environ.get("KRAMERS_BACKEND", "").strip().lower()
    if want == "python" or _compiled is None:
        return "python"
    return "cython"


def _run_one(gen, x, n_steps, dt, noise, prog, wells, stop_mask, ball_c, ball_r2, label, step0):
    evs = []
    status, done = 0, 0
    while True:
        ev_step = np.zeros(_EVENT_CAP, dtype=np.int64)
        ev_label = np.zeros(_EVENT_CAP, dtype=np.int32)
        status, s, nev, label = _compiled.run_path(
            gen.bit_generator, x, n_steps - done, dt, noise, prog.coef, prog.exps, prog.comp,
            prog.maxp, prog.ucoef, prog.uexps, wells.centers, wells.rho2, wells.uthr,
            stop_mask, ball_c, ball_r2, ev_step, ev_label, label, step0 + done)
        evs.extend(zip(ev_step[:nev].tolist(), ev_label[:nev].tolist()))
        done += s
        if status != 4:
            return status, done, label, evs


def run_paths(gens, X, n_steps, dt, noise, prog, wells=None, stop=(), ball=None,
              labels=None, step0=0, backend=None, threads=1):
    """Advance every row of X in place by up to ``n_steps`` Euler-Maruyama steps.

    Parameters
    ----------
    gens : list of numpy Generator, one per row
    wells : WellTable or None
    stop : iterable of well indices that end a path when entered
    ball : (center, radius) or None; leaving it ends a path
    labels : current well index per path (-1 outside)

    Returns
    -------
    status, steps, labels : int arrays
    events : list of lists of (absolute step, label)
    """
    X = np.ascontiguousarray(X, dtype=float)
    n, d = X.shape
    wells = WellTable.empty(d) if wells is None else wells
    nw = len(wells.rho2)
    stop_mask = np.zeros(max(nw, 1), dtype=np.uint8)
    for k in stop:
        stop_mask[k] = 1
    labels = np.full(n, -1, dtype=np.int64) if labels is None else np.asarray(labels, dtype=np.int64)
    backend = default_backend() if backend is None else backend
    if backend == "python":
        ball_t = None if ball is None else (np.asarray(ball[0], dtype=float), float(ball[1]) ** 2)
        out = _kernels_py.run_paths(gens, X, n_steps, dt, noise, prog, wells if nw else None,
                                    stop_mask[:nw], ball_t, labels, step0)
        return out + (X,)
    if _compiled is None:
        raise RuntimeError("compiled backend is not available")
    ball_c = np.zeros(d) if ball is None else np.ascontiguousarray(ball[0], dtype=float)
    ball_r2 = -1.0 if ball is None else float(ball[1]) ** 2
    centers = np.ascontiguousarray(wells.centers, dtype=float).reshape(nw, d)
    wt = WellTable(wells.ids, centers, np.ascontiguousarray(wells.rho2, dtype=float),
                   np.ascontiguousarray(wells.uthr, dtype=float))

    def task(i):
        x = X[i].copy()
        res = _run_one(gens[i], x, n_steps, dt, noise, prog, wt, stop_mask, ball_c, ball_r2,
                       int(labels[i]), step0)
        return x, res

    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(n)))
    else:
        results = [task(i) for i in range(n)]
    status = np.empty(n, dtype=np.int64)
    steps = np.empty(n, dtype=np.int64)
    labs = np.empty(n, dtype=np.int64)
    events = []
    for i, (x, (st, s, lab, ev)) in enumerate(results):
        X[i] = x
        status[i], steps[i], labs[i] = st, s, lab
        events.append(ev)
    return status, steps, labs, events, X
