"""Saddle connectivity graph and the heights derived from it by a union-find sweep."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (AssumptionViolated, DescentStall, GateDegeneracyWarning, HeightUnreachable,
                     LeftBox, TooFewMinima)
from .landscape import CriticalPoint, find_critical_points, normalize_shift
from .potential import PotentialSpec

__all__ = [
    "TOL_GATE",
    "DescentEdge",
    "LandscapeGraph",
    "UnionFind",
    "descend",
    "build_descent_edges",
    "communication_heights",
    "gates_and_neighbors",
    "analyze",
]

TOL_GATE = 1e-7
DELTA_UNSTABLE = 1e-4   # times diam(box)
R_CAPTURE = 1e-5        # times diam(box)
ODE_ATOL = 1e-10
ODE_RTOL = 1e-9


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, items):
        self.parent = {v: v for v in items}
        self.size = {v: 1 for v in items}

    def find(self, v):
        p = self.parent
        while p[v] != v:
            p[v] = p[p[v]]
            v = p[v]
        return v

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def members(self, v):
        r = self.find(v)
        return sorted(x for x in self.parent if self.find(x) == r)


@dataclass
class DescentEdge:
    saddle_id: int
    minus_target: int
    plus_target: int
    direction: np.ndarray
    path_minus: np.ndarray | None = None
    path_plus: np.ndarray | None = None

    @property
    def targets(self):
        return {self.minus_target, self.plus_target}

    @property
    def is_loop(self):
        return self.minus_target == self.plus_target

    def to_json(self):
        return {"saddle_id": self.saddle_id, "minus_target": self.minus_target,
                "plus_target": self.plus_target,
                "direction": [float(v) for v in self.direction]}


@dataclass
class LandscapeGraph:
    minima: list
    saddles: list
    higher: list
    edges: list
    theta: np.ndarray
    gamma: np.ndarray
    d1: float
    gates: dict
    V: dict
    S: dict
    spec: PotentialSpec | None = field(default=None, repr=False)

    @property
    def minima_ids(self):
        return [m.id for m in self.minima]

    def min_index(self, mid):
        return self.minima_ids.index(mid)

    def point(self, cid):
        for c in self.minima + self.saddles + self.higher:
            if c.id == cid:
                return c
        raise KeyError(cid)

    @property
    def critical_points(self):
        return sorted(self.minima + self.saddles + self.higher, key=lambda c: c.id)

    def edge(self, saddle_id):
        for e in self.edges:
            if e.saddle_id == saddle_id:
                return e
        raise KeyError(saddle_id)

    def theta1(self, eps):
        return float(np.exp(self.d1 / eps))

    def to_json(self):
        ids = self.minima_ids
        theta = [[None if i == j else float(self.theta[i, j]) for j in range(len(ids))]
                 for i in range(len(ids))]
        return {
            "critical_points": [c.to_json() for c in self.critical_points],
            "minima": ids,
            "saddles": [s.id for s in self.saddles],
            "higher_index": [c.id for c in self.higher],
            "edges": [e.to_json() for e in self.edges],
            "theta": theta,
            "gamma": [float(g) for g in self.gamma],
            "d1": float(self.d1),
            "gates": {str(k): list(v) for k, v in self.gates.items()},
            "V": {str(k): sorted(v) for k, v in self.V.items()},
            "S": {f"{a},{b}": sorted(v) for (a, b), v in sorted(self.S.items())},
        }


def _as_positions(points):
    return np.array([p.x if isinstance(p, CriticalPoint) else p for p in points], dtype=float)


def descend(spec: PotentialSpec, x0, minima, others=(), r_capture=None, max_time=None,
            return_path=False, check_box=True):
    """Follow x' = b(x) from ``x0`` until it is captured by a minimum.

    Parameters
    ----------
    minima : list of CriticalPoint
    others : list of CriticalPoint
        Non-minimum critical points, used to diagnose stalls.

    Returns
    -------
    int or (int, ndarray)
        Id of the capturing minimum (and the polyline of accepted RK steps).
    """
    x0 = np.asarray(x0, dtype=float)
    diam = spec.diam
    if r_capture is None:
        r_capture = R_CAPTURE * diam
    mins = _as_positions(minima)
    ids = [m.id for m in minima]
    for o in others:
        if np.linalg.norm(x0 - o.x) <= 1e-6 * diam:
            raise ValueError(f"descent started on critical point {o.id}")
    d0 = np.linalg.norm(mins - x0, axis=1)
    if d0.min() <= r_capture:
        k = int(np.argmin(d0))
        return (ids[k], x0[None, :]) if return_path else ids[k]

    lam = min(float(np.min(m.hess_eigvals)) for m in minima)
    chunk = 20.0 / lam
    if max_time is None:
        max_time = 200.0 * chunk
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    margin = 0.5 * (hi - lo)

    def rhs(_, x):
        return spec.drift(x)

    def captured(_, x):
        return np.min(np.linalg.norm(mins - x, axis=1)) - r_capture

    captured.terminal = True

    def left(_, x):
        return min(np.min(x - (lo - margin)), np.min((hi + margin) - x))

    left.terminal = True
    events = [captured, left] if check_box else [captured]

    path = [x0[None, :]]
    x, t = x0, 0.0
    while t < max_time:
        sol = solve_ivp(rhs, (0.0, chunk), x, method="RK45", atol=ODE_ATOL, rtol=ODE_RTOL,
                        events=events)
        path.append(sol.y.T[1:])
        x = sol.y[:, -1]
        t += sol.t[-1]
        if sol.status == 1:
            if sol.t_events[0].size:
                k = int(np.argmin(np.linalg.norm(mins - x, axis=1)))
                return (ids[k], np.vstack(path)) if return_path else ids[k]
            raise LeftBox(f"descent from {x0} left the box near {x}")
        if np.linalg.norm(spec.grad(x)) < 1e-8:
            near = [o.id for o in others if np.linalg.norm(x - o.x) < 1e-3 * diam]
            raise DescentStall(f"descent from {x0} stalled at {x} (near critical points {near})")
    raise DescentStall(f"descent from {x0} not captured within time {max_time}")


def _unstable_direction(spec, cp):
    A = spec.jac_drift(cp.x)
    w, V = np.linalg.eig(A)
    k = int(np.argmax(w.real))
    v = np.real(V[:, k])
    v /= np.linalg.norm(v)
    # deterministic orientation: first significant component positive
    j = int(np.argmax(np.abs(v) > 1e-12))
    return v if v[j] > 0 else -v


def build_descent_edges(spec: PotentialSpec, cps, keep_paths=False, tol_descent=1e-12):
    """Launch a descent on each side of every index-1 point along its unstable direction.

    Raises
    ------
    AssumptionViolated
        A descent ends anywhere but at a minimum, or U fails to decrease.
    """
    minima = [c for c in cps if c.index == 0]
    others = [c for c in cps if c.index != 0]
    delta = DELTA_UNSTABLE * spec.diam
    edges = []
    for s in (c for c in cps if c.index == 1):
        e1 = _unstable_direction(spec, s)
        targets, paths = [], []
        for sign in (-1.0, 1.0):
            try:
                tgt, path = descend(spec, s.x + sign * delta * e1, minima, others,
                                    return_path=True)
            except (DescentStall, LeftBox) as exc:
                raise AssumptionViolated(f"saddle {s.id}: descent does not reach a minimum ({exc})",
                                         item=s.id) from exc
            u = spec.U(path)
            if np.any(np.diff(u) > tol_descent * (1.0 + np.abs(u[:-1]))):
                raise AssumptionViolated(f"saddle {s.id}: U not decreasing along descent", item=s.id)
            targets.append(tgt)
            paths.append(path)
        edges.append(DescentEdge(s.id, targets[0], targets[1], e1,
                                 paths[0] if keep_paths else None,
                                 paths[1] if keep_paths else None))
    return edges


def _sweep(minima, saddles, edges):
    """Kruskal sweep over saddles ordered by (height, id); yields merge events."""
    height = {s.id: s.u for s in saddles}
    uf = UnionFind([m.id for m in minima])
    events = []
    for e in sorted(edges, key=lambda e: (height[e.saddle_id], e.saddle_id)):
        a, b = e.minus_target, e.plus_target
        ca, cb = uf.members(a), uf.members(b)
        merged = uf.union(a, b)
        events.append((height[e.saddle_id], e.saddle_id, ca, cb, merged))
    return events, uf


def communication_heights(minima, saddles, edges):
    """Theta(m, m') from a union-find sweep; diagonal holds -inf.

    Raises
    ------
    HeightUnreachable
        Some pair of minima is never joined inside the box.
    """
    ids = [m.id for m in minima]
    pos = {mid: i for i, mid in enumerate(ids)}
    n = len(ids)
    theta = np.full((n, n), np.nan)
    np.fill_diagonal(theta, -np.inf)
    events, _ = _sweep(minima, saddles, edges)
    for h, _sid, ca, cb, merged in events:
        if not merged:
            continue
        for a in ca:
            for b in cb:
                theta[pos[a], pos[b]] = theta[pos[b], pos[a]] = h
    if np.isnan(theta).any():
        raise HeightUnreachable("landscape is disconnected inside the box")
    return theta


def gates_and_neighbors(minima, saddles, edges, theta, tol_gate=TOL_GATE):
    """Depths, d1, gates, neighbor sets and separating-saddle sets.

    Returns
    -------
    gamma : ndarray
    d1 : float
    gates : dict  minimum id -> sorted saddle ids
    V : dict      minimum id -> set of neighbor minimum ids
    S : dict      (m, m') -> set of saddle ids
    """
    if len(minima) < 2:
        raise TooFewMinima("depth needs at least two local minima")
    ids = [m.id for m in minima]
    u_min = np.array([m.u for m in minima])
    off = theta.copy()
    np.fill_diagonal(off, np.inf)
    gamma = off.min(axis=1) - u_min
    d1 = float(gamma.min())
    height = {s.id: s.u for s in saddles}
    events, _ = _sweep(minima, saddles, edges)

    gates, V, S = {}, {}, {}
    for i, m in enumerate(ids):
        h = u_min[i] + gamma[i]
        # component of m from the union-find state strictly below h
        below = [e for e in events if e[0] < h - tol_gate]
        uf = UnionFind(ids)
        for _, sid, _, _, _ in below:
            ed = next(e for e in edges if e.saddle_id == sid)
            uf.union(ed.minus_target, ed.plus_target)
        comp = set(uf.members(m))
        gm, vm = [], set()
        for e in edges:
            if abs(height[e.saddle_id] - h) > tol_gate:
                continue
            inside = [t in comp for t in (e.minus_target, e.plus_target)]
            if all(inside):
                if m in e.targets:
                    warnings.warn(f"saddle {e.saddle_id} at the gate height of minimum {m} "
                                  "returns to the same basin; excluded from the gates",
                                  GateDegeneracyWarning, stacklevel=2)
                continue
            if not any(inside):
                continue
            gm.append(e.saddle_id)
            if m in e.targets:
                other = (e.targets - {m}).pop()
                vm.add(other)
                S.setdefault((m, other), set()).add(e.saddle_id)
        gates[m] = sorted(gm)
        V[m] = vm
    return gamma, d1, gates, V, S


def analyze(spec: PotentialSpec, resolution=21, seeds=None, keep_paths=False):
    """Critical points + descent graph + heights for ``spec``.

    The returned graph carries the spec shifted so that min U = 0.
    """
    cps = find_critical_points(spec, resolution=resolution, seeds=seeds)
    spec, cps = normalize_shift(spec, cps)
    minima = [c for c in cps if c.index == 0]
    saddles = [c for c in cps if c.index == 1]
    higher = [c for c in cps if c.index >= 2]
    if len(minima) < 2:
        raise TooFewMinima(f"{spec.name}: found {len(minima)} local minima, need at least two")
    edges = build_descent_edges(spec, cps, keep_paths=keep_paths)
    theta = communication_heights(minima, saddles, edges)
    gamma, d1, gates, V, S = gates_and_neighbors(minima, saddles, edges, theta)
    return LandscapeGraph(minima, saddles, higher, edges, theta, gamma, d1, gates, V, S, spec)
