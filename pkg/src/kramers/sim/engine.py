"""Ensemble Euler-Maruyama engine: configuration, wells, hitting times, trace process."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from ..errors import NonFinite, StepSizeWarning
from ..heights import descend
from .backend import DriftProgram, WellTable, default_backend, run_paths
from .rng import path_generators

__all__ = [
    "SimConfig",
    "TrajectoryRecord",
    "EnsembleResult",
    "default_dt",
    "default_r0",
    "step_em",
    "WellSet",
    "in_well",
    "run_ensemble",
    "hitting_time",
    "trace_process",
    "mean_ci",
]

STATUS_NAMES = {0: "horizon", 1: "target", 2: "left_ball", 3: "nonfinite"}


def default_dt(eps):
    return min(1e-3, eps / 100.0)


def default_r0(graph):
    """Sublevel offset of the wells: half the smallest depth."""
    return 0.5 * float(graph.d1)


@dataclass
class SimConfig:
    eps: float
    dt: float | None = None
    horizon: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    well_r0: float | None = None
    capture: str = "sublevel-ball"
    threads: int = 1
    backend: str | None = None

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.dt is None:
            self.dt = default_dt(self.eps) if self.eps > 0 else 1e-3
        if self.eps > 0 and self.dt > 0.01 * self.eps * (1 + 1e-12):
            warnings.warn(f"dt = {self.dt:g} exceeds 0.01 eps = {0.01 * self.eps:g}",
                          StepSizeWarning, stacklevel=2)

    @property
    def noise(self):
        return float(np.sqrt(2.0 * self.eps * self.dt))

    def steps(self, horizon=None):
        return int(round((self.horizon if horizon is None else horizon) / self.dt))

    def to_json(self):
        out = asdict(self)
        out["backend"] = self.backend or default_backend()
        out.pop("threads")
        return out


def step_em(state, spec, eps, dt, noise):
    """One Euler-Maruyama step x + b(x) dt + sqrt(2 eps dt) eta.

    Raises
    ------
    NonFinite
        If the new state has a non-finite component.
    """
    x = np.asarray(state, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = (x + spec.drift(x) * dt) + np.sqrt(2.0 * eps * dt) * np.asarray(noise, dtype=float)
    if not np.all(np.isfinite(out)):
        raise NonFinite("Euler-Maruyama state diverged")
    return out


class WellSet:
    """The wells E(m) = component of {U <= U(m) + r0} containing m, one per minimum.

    The kernels test membership by the sublevel condition and a ball around
    m whose radius is the distance to the nearest other critical point; the
    descent-based test ``contains`` is the reference definition.
    """

    def __init__(self, graph, r0=None, cache_cell=None):
        self.graph = graph
        self.spec = graph.spec
        self.r0 = default_r0(graph) if r0 is None else float(r0)
        self.ids = graph.minima_ids
        cps = graph.critical_points
        self.centers = np.array([m.x for m in graph.minima])
        rho = []
        for m in graph.minima:
            others = [np.linalg.norm(c.x - m.x) for c in cps if c.id != m.id]
            rho.append(min(others) if others else np.inf)
        self.rho = np.array(rho)
        self.levels = np.array([m.u + self.r0 for m in graph.minima])
        self._cell = 1e-3 * self.spec.diam if cache_cell is None else cache_cell
        self._cache = {}

    def table(self):
        raw = self.levels + self.spec.origin_shift
        return WellTable(list(self.ids), self.centers.copy(), self.rho ** 2, raw)

    def index(self, mid):
        return self.ids.index(mid)

    def label(self, X):
        """Kernel membership rule: well index per point, -1 outside."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        u = self.spec.U(X)
        lab = np.full(len(X), -1, dtype=np.int64)
        for w in range(len(self.ids)):
            r2 = np.sum((X - self.centers[w]) ** 2, axis=1)
            hit = (lab < 0) & (u <= self.levels[w]) & (r2 <= self.rho[w] ** 2)
            lab[hit] = w
        return lab

    def descent_target(self, x):
        key = tuple(np.floor(np.asarray(x) / self._cell).astype(np.int64).tolist())
        if key in self._cache:
            return self._cache[key]
        try:
            t = descend(self.spec, x, self.graph.minima, r_capture=1e-3 * self.spec.diam)
        except Exception:
            t = None
        self._cache[key] = t
        return t

    def contains(self, x, mid):
        """Sublevel condition and descent to ``mid`` (budget exhaustion counts as outside)."""
        x = np.asarray(x, dtype=float)
        m = self.graph.point(mid)
        if self.spec.U(x) > m.u + self.r0:
            return False
        if np.linalg.norm(x - m.x) <= 1e-3 * self.spec.diam:
            return True
        return self.descent_target(x) == mid

    def to_json(self):
        return {"r0": self.r0, "ids": list(self.ids), "centers": self.centers.tolist(),
                "radii": self.rho.tolist(), "levels": self.levels.tolist()}


def in_well(x, m, graph, r0, wells=None):
    """True iff U(x) <= U(m) + r0 and the descent flow from x converges to m."""
    ws = wells if wells is not None else WellSet(graph, r0)
    mid = getattr(m, "id", m)
    return ws.contains(x, mid)


@dataclass
class TrajectoryRecord:
    """Event-thinned path: (time, label) entries on well changes, and the terminal state."""
    index: int
    start_label: int
    events: list
    terminal: np.ndarray
    terminal_label: int
    status: str
    time: float

    def to_rows(self):
        return [(self.index, t, lab) for t, lab in self.events]


@dataclass
class EnsembleResult:
    config: SimConfig
    wells: WellSet | None
    records: list
    x0: np.ndarray
    extra: dict = field(default_factory=dict)

    @property
    def terminal(self):
        return np.array([r.terminal for r in self.records])

    @property
    def terminal_labels(self):
        return np.array([r.terminal_label for r in self.records])

    def statuses(self):
        return [r.status for r in self.records]

    def occupation(self):
        """Histogram over wells plus 'outside' (last entry); sums to 1."""
        k = len(self.wells.ids) if self.wells is not None else 0
        lab = self.terminal_labels
        h = np.array([np.mean(lab == w) for w in range(k)] + [np.mean(lab < 0)])
        return h

    def events_csv_rows(self):
        rows = []
        for r in self.records:
            rows.extend(r.to_rows())
        return rows


def run_ensemble(spec, config: SimConfig, x0, wells: WellSet | None = None, stop=(),
                 ball=None, horizon=None, path_offset=0, drift_polys=None):
    """Simulate ``config.n_paths`` independent paths from ``x0``.

    ``x0`` is one point or an (n_paths, d) array.  ``stop`` lists minimum ids
    whose wells end a path.  Times are unscaled.
    """
    n = config.n_paths
    d = spec.dim
    X = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (n, d)))
    X0 = X.copy()
    prog = DriftProgram.from_spec(spec, drift_polys)
    table = wells.table() if wells is not None else None
    stop_idx = [wells.index(s) for s in stop] if wells is not None else []
    labels = wells.label(X) if wells is not None else np.full(n, -1)
    gens = path_generators(config.seed, n, path_offset)
    nsteps = config.steps(horizon)

    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    events = [[] for _ in range(n)]
    # paths starting inside a stopping well are done at time zero
    pre = np.array([lab >= 0 and lab in stop_idx for lab in labels], dtype=bool)
    status[pre] = 1
    todo = np.flatnonzero(~pre)
    if todo.size:
        st, sp, lab, ev, Xt = run_paths([gens[i] for i in todo], X[todo], nsteps, config.dt,
                                        config.noise, prog, table, stop_idx, ball,
                                        labels[todo], 0, config.backend, config.threads)
        X[todo] = Xt
        status[todo], steps[todo], labels[todo] = st, sp, lab
        for k, i in enumerate(todo):
            events[i] = ev[k]
    start = wells.label(X0) if wells is not None else np.full(n, -1)
    records = []
    for i in range(n):
        records.append(TrajectoryRecord(
            index=path_offset + i, start_label=int(start[i]),
            events=[(s * config.dt, int(lab)) for s, lab in events[i]],
            terminal=X[i].copy(), terminal_label=int(labels[i]),
            status=STATUS_NAMES[int(status[i])], time=float(steps[i] * config.dt)))
    return EnsembleResult(config, wells, records, X0)


def hitting_time(record: TrajectoryRecord, target_label=None):
    """First time the record enters ``target_label`` (or stops on target); None on timeout."""
    if target_label is None:
        return record.time if record.status == "target" else None
    if record.start_label == target_label:
        return 0.0
    for t, lab in record.events:
        if lab == target_label:
            return t
    return None


def trace_process(record: TrajectoryRecord, t_end=None):
    """Well labels of the path with time outside every well removed.

    Returns (segments, outside_time) where segments is a list of
    (label, in-well duration) in order, consecutive equal labels merged.
    """
    t_end = record.time if t_end is None else t_end
    times = [0.0] + [t for t, _ in record.events] + [t_end]
    labs = [record.start_label] + [lab for _, lab in record.events]
    segs, outside = [], 0.0
    for k, lab in enumerate(labs):
        dur = max(0.0, min(times[k + 1], t_end) - times[k])
        if lab < 0:
            outside += dur
            continue
        if segs and segs[-1][0] == lab:
            segs[-1] = (lab, segs[-1][1] + dur)
        else:
            segs.append((lab, dur))
    return segs, outside


def mean_ci(values, z=1.96):
    """Mean and normal-approximation half width."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(z * v.std(ddof=1) / np.sqrt(v.size))
