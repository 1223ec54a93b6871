"""Brute-force reference computations used to check the fast paths.

Nothing here reuses the package's solvers; each routine works directly on
U sampled on a grid or on finite differences.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

__all__ = [
    "grid_values",
    "flood_minimax",
    "flood_theta",
    "fd_gradient",
    "fd_hessian",
    "grid_critical_cells",
]


def grid_values(spec, n, box=None, chunk=2_000_000):
    """U on a regular grid with ``n`` points per axis; returns (axes, values)."""
    box = spec.box if box is None else np.asarray(box, dtype=float)
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        vals[s:s + chunk] = spec.U(pts[s:s + chunk])
    return axes, vals.reshape(mesh[0].shape)


def _cell(axes, x):
    return tuple(int(np.argmin(np.abs(a - xi))) for a, xi in zip(axes, x))


def flood_minimax(values, cell_a, cell_b):
    """Lowest level h such that {U <= h} joins the two cells (face connectivity).

    Binary search over the sorted distinct grid values with a connected-component
    labeling at each probe.  Returns ``(h, quantum)`` where quantum is the largest
    U jump between the bottleneck cell and its face neighbours.
    """
    levels = np.unique(values)
    lo = int(np.searchsorted(levels, max(values[cell_a], values[cell_b])))
    hi = len(levels) - 1
    structure = ndimage.generate_binary_structure(values.ndim, 1)

    def joined(k):
        lab, _ = ndimage.label(values <= levels[k], structure=structure)
        return lab[cell_a] != 0 and lab[cell_a] == lab[cell_b]

    if not joined(hi):
        raise ValueError("cells are not connected on this grid")
    while lo < hi:
        mid = (lo + hi) // 2
        if joined(mid):
            hi = mid
        else:
            lo = mid + 1
    h = float(levels[lo])
    # bottleneck cell(s): value == h, adjacent to both sides
    quantum = 0.0
    for idx in zip(*np.nonzero(values == h)):
        for ax in range(values.ndim):
            for step in (-1, 1):
                j = list(idx)
                j[ax] += step
                if 0 <= j[ax] < values.shape[ax]:
                    quantum = max(quantum, abs(float(values[tuple(j)]) - h))
    return h, quantum


def flood_theta(spec, minima_x, n):
    """Pairwise grid-flood minimax heights between the given minima.

    Returns ``(theta, quantum)`` matrices; the diagonal of theta is -inf.
    """
    axes, vals = grid_values(spec, n)
    cells = [_cell(axes, x) for x in minima_x]
    k = len(cells)
    theta = np.full((k, k), -np.inf)
    quantum = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            h, q = flood_minimax(vals, cells[i], cells[j])
            theta[i, j] = theta[j, i] = h
            quantum[i, j] = quantum[j, i] = q
    return theta, quantum


def fd_gradient(f, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(grad, x, h=1e-5):
    """Central finite-difference Jacobian of a vector function (Hessian from a gradient)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * h)
    return J


def grid_critical_cells(spec, n):
    """Count grid cells where every gradient component changes sign.

    A cell (hyper-cube of 2**d grid nodes) is flagged when each component of
    grad U takes both signs on its corners.  Returns the flagged cell centers
    after merging face-adjacent flags.
    """
    axes = [np.linspace(lo, hi, n) for lo, hi in spec.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    G = spec.grad(pts).reshape(mesh[0].shape + (spec.dim,))
    d = spec.dim
    flag = np.ones(tuple(s - 1 for s in mesh[0].shape), dtype=bool)
    for c in range(d):
        g = G[..., c]
        pos = np.zeros(flag.shape, dtype=bool)
        neg = np.zeros(flag.shape, dtype=bool)
        for corner in np.ndindex(*([2] * d)):
            sl = tuple(slice(k, k + s) for k, s in zip(corner, flag.shape))
            pos |= g[sl] >= 0
            neg |= g[sl] <= 0
        flag &= pos & neg
    lab, nlab = ndimage.label(flag)
    centers = []
    for k in range(1, nlab + 1):
        idx = np.argwhere(lab == k).mean(axis=0)
        centers.append([np.interp(i + 0.5, np.arange(n), a) for i, a in zip(idx, axes)])
    return np.array(centers)
