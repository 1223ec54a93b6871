"""Pure-numpy fallback for the compiled Euler-Maruyama loop.

Paths are advanced together as one array.  Every floating-point operation is
done in the same order as in the compiled kernel, and each path draws its
normals from its own generator, so trajectories agree bit for bit.
"""
from __future__ import annotations

import numpy as np

STATUS_HORIZON, STATUS_TARGET, STATUS_LEFT_BALL, STATUS_NONFINITE = 0, 1, 2, 3

_BLOCK = 1024


def _powers(X, maxp):
    P = [np.ones_like(X)]
    for _ in range(maxp):
        P.append(P[-1] * X)
    return P


def _term(c, e, P):
    t = np.full(P[0].shape[0], c)
    for k in range(len(e)):
        t = t * P[e[k]][:, k]
    return t


def _drift(prog, P, n):
    B = np.zeros((n, prog.dim))
    for c, e, j in zip(prog.coef, prog.exps, prog.comp):
        B[:, j] = B[:, j] + _term(c, e, P)
    return B


def labels_of(X, prog, wells, P=None):
    """Well index of each row of X (first match), -1 outside every well."""
    n = X.shape[0]
    lab = np.full(n, -1, dtype=np.int64)
    if wells is None or len(wells.rho2) == 0:
        return lab
    if P is None:
        P = _powers(X, prog.maxp)
    u = np.zeros(n)
    for c, e in zip(prog.ucoef, prog.uexps):
        u = u + _term(c, e, P)
    for w in range(len(wells.rho2)):
        r2 = np.zeros(n)
        for k in range(X.shape[1]):
            dx = X[:, k] - wells.centers[w, k]
            r2 = r2 + dx * dx
        hit = (lab < 0) & (u <= wells.uthr[w]) & (r2 <= wells.rho2[w])
        lab[hit] = w
    return lab


def run_paths(gens, X, n_steps, dt, noise, prog, wells, stop_mask, ball, labels, step0):
    """Advance all rows of X (in place).

    Returns (status, steps, labels, events) with events a list of
    [(absolute step, label), ...] per path.
    """
    n, d = X.shape
    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    labels = np.array(labels, dtype=np.int64)
    events = [[] for _ in range(n)]
    active = np.arange(n)
    use_u = wells is not None and len(wells.rho2) > 0
    stop_mask = np.asarray(stop_mask, dtype=bool) if use_u else None
    s = 0
    while s < n_steps and active.size:
        blk = int(min(_BLOCK, n_steps - s))
        Z = np.stack([gens[i].standard_normal((blk, d)) for i in active], axis=1)
        row = np.arange(active.size)
        for j in range(blk):
            if active.size == 0:
                break
            x = X[active]
            B = _drift(prog, _powers(x, prog.maxp), active.size)
            x = (x + B * dt) + noise * Z[j, row]
            s_now = s + j + 1
            steps[active] = s_now
            done = np.zeros(active.size, dtype=bool)
            bad = ~np.all(np.isfinite(x), axis=1)
            status[active[bad]] = STATUS_NONFINITE
            done |= bad
            if use_u:
                lab = labels_of(x, prog, wells)
                changed = np.flatnonzero((lab != labels[active]) & ~bad)
                for k in changed:
                    events[active[k]].append((step0 + s_now, int(lab[k])))
                labels[active[~bad]] = lab[~bad]
                hit = ~done & (lab >= 0) & stop_mask[np.maximum(lab, 0)]
                status[active[hit]] = STATUS_TARGET
                done |= hit
            if ball is not None:
                r2 = np.zeros(active.size)
                for k in range(d):
                    dx = x[:, k] - ball[0][k]
                    r2 = r2 + dx * dx
                out = ~done & (r2 > ball[1])
                status[active[out]] = STATUS_LEFT_BALL
                done |= out
            X[active] = x
            if done.any():
                keep = ~done
                active, row = active[keep], row[keep]
        s += blk
    return status, steps, labels, events
