"""Monte Carlo experiments comparing the diffusion with the reduced description."""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np
from scipy import integrate, optimize

from ..chain import assemble_chain, semigroup
from ..errors import QuadratureFailure
from ..landscape import find_critical_points
from ..local import extend_field_b0
from ..potential import PotentialSpec
from .engine import SimConfig, WellSet, default_dt, hitting_time, mean_ci, run_ensemble, trace_process
from .rng import path_generators

__all__ = [
    "predicted_hitting_time",
    "exit_time_experiment",
    "transition_law_experiment",
    "subscale_experiment",
    "feynman_kac_u",
    "mixing_experiment",
    "gibbs_checks",
    "saddle_exit_experiment",
    "hitting_wells_experiment",
    "tv_distance",
    "shallowest",
    "fit_power",
]


def tv_distance(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


def shallowest(graph):
    """First minimum whose depth equals d1."""
    return graph.minima_ids[int(np.argmin(graph.gamma))]


def predicted_hitting_time(graph, start, target, chain=None):
    """Mean hitting time of ``target`` from ``start`` for the reduced chain, in theta1 units."""
    chain = assemble_chain(graph) if chain is None else chain
    n = len(chain.states)
    j = chain.index(target)
    T = [k for k in range(n) if k != j]
    h = np.linalg.solve(-chain.L[np.ix_(T, T)], np.ones(len(T)))
    return float(h[T.index(chain.index(start))])


def exit_time_experiment(graph, eps, n_paths=2000, dt=None, seed=0, start=None, target=None,
                         r0=None, horizon_factor=20.0, threads=1, backend=None):
    """Mean first time from ``start`` to the well of ``target`` vs the Eyring-Kramers value."""
    ids = graph.minima_ids
    start = ids[-1] if start is None else start
    target = ids[0] if target is None else target
    wells = WellSet(graph, r0)
    chain = assemble_chain(graph)
    pred = predicted_hitting_time(graph, start, target, chain) * graph.theta1(eps)
    cfg = SimConfig(eps=eps, dt=dt if dt is not None else default_dt(eps),
                    horizon=horizon_factor * pred, n_paths=n_paths, seed=seed, well_r0=wells.r0,
                    threads=threads, backend=backend)
    res = run_ensemble(graph.spec, cfg, graph.point(start).x, wells, stop=[target])
    times = [hitting_time(r) for r in res.records]
    hit = [t for t in times if t is not None]
    mean, half = mean_ci(hit)
    return {
        "kind": "exit",
        "start": start, "target": target, "eps": eps, "n_paths": n_paths, "dt": cfg.dt,
        "r0": wells.r0,
        "mean": mean, "ci95": half, "timeouts": len(times) - len(hit),
        "predicted": pred, "ratio": mean / pred,
    }, res


def _histogram_vs_chain(graph, res, start, t_scaled, chain):
    wells = res.wells
    occ = res.occupation()
    P = semigroup(chain, t_scaled)
    row = P[chain.index(start)]
    pred = np.array([row[chain.index(m)] for m in wells.ids] + [0.0])
    return occ, pred


def transition_law_experiment(graph, eps, t_scaled=1.0, n_paths=1000, dt=None, seed=0, start=None,
                              r0=None, threads=1, backend=None):
    """Well histogram at t theta1 vs the reduced-chain row of p_t, plus time spent outside wells."""
    start = shallowest(graph) if start is None else start
    wells = WellSet(graph, r0)
    chain = assemble_chain(graph)
    horizon = t_scaled * graph.theta1(eps)
    cfg = SimConfig(eps=eps, dt=dt if dt is not None else default_dt(eps), horizon=horizon,
                    n_paths=n_paths, seed=seed, well_r0=wells.r0, threads=threads, backend=backend)
    res = run_ensemble(graph.spec, cfg, graph.point(start).x, wells)
    occ, pred = _histogram_vs_chain(graph, res, start, t_scaled, chain)
    outside = [trace_process(r, horizon)[1] for r in res.records]
    return {
        "kind": "transition",
        "start": start, "eps": eps, "t_scaled": t_scaled, "n_paths": n_paths, "dt": cfg.dt,
        "r0": wells.r0, "labels": list(wells.ids) + ["outside"],
        "empirical": occ.tolist(), "predicted": pred.tolist(), "tv": tv_distance(occ, pred),
        "outside_time_fraction": float(np.sum(outside) / (horizon * n_paths)),
    }, res


def subscale_experiment(graph, eps, offset=0.3, n_paths=1000, dt=None, seed=0, start=None, r0=None,
                        threads=1, backend=None):
    """Mass on the starting well at time exp((d1 - offset) / eps), below the first time scale."""
    start = shallowest(graph) if start is None else start
    wells = WellSet(graph, r0)
    horizon = float(np.exp((graph.d1 - offset) / eps))
    cfg = SimConfig(eps=eps, dt=dt if dt is not None else default_dt(eps), horizon=horizon,
                    n_paths=n_paths, seed=seed, well_r0=wells.r0, threads=threads, backend=backend)
    res = run_ensemble(graph.spec, cfg, graph.point(start).x, wells)
    occ = res.occupation()
    return {
        "kind": "subscale", "start": start, "eps": eps, "rho": horizon, "n_paths": n_paths,
        "labels": list(wells.ids) + ["outside"], "empirical": occ.tolist(),
        "mass_on_start": float(occ[wells.index(start)]),
    }, res


def feynman_kac_u(spec, u0, x0, t_scaled, config: SimConfig, theta1=1.0, wells=None):
    """Estimate E_x[u0(x_eps(t theta1))] with a 95% normal-approximation half width."""
    x0 = np.asarray(x0, dtype=float)
    if t_scaled == 0:
        return float(np.asarray(u0(x0[None, :])).reshape(-1)[0]), 0.0
    res = run_ensemble(spec, config, x0, wells, horizon=t_scaled * theta1)
    vals = np.asarray(u0(res.terminal), dtype=float).reshape(-1)
    return mean_ci(vals)


def mixing_experiment(spec, m, eps, theta_exp=0.25, n_paths=2000, dt=None, seed=0, x0=None,
                      r5=None, n_checkpoints=8):
    """Couple y_eps (drift b0) with its Gaussian approximation y + sqrt(2 eps) xi on one noise stream.

    Returns the fourth-moment gap E|y_eps - z_eps|^4 (at t_eps and its max
    over checkpoints) and the sample covariance of y_eps(t_eps) - m.
    """
    b0 = extend_field_b0(spec, m, r5=r5)
    mx, d = b0.m, len(b0.m)
    dt = default_dt(eps) if dt is None else dt
    t_eps = eps ** (-theta_exp)
    n = int(round(t_eps / dt))
    if x0 is None:
        x0 = mx.copy()
        x0[0] += 0.5 * b0.r5
    x0 = np.asarray(x0, dtype=float)
    gens = path_generators(seed, n_paths)
    ye = np.tile(x0, (n_paths, 1))
    y = x0.copy()
    xi = np.zeros((n_paths, d))
    s2e, sdt = np.sqrt(2 * eps), np.sqrt(dt)
    checks = set(np.linspace(n // n_checkpoints, n, n_checkpoints).astype(int).tolist())
    gaps = []
    blk = 1024
    k = 0
    while k < n:
        b = min(blk, n - k)
        Z = np.stack([g.standard_normal((b, d)) for g in gens], axis=1)
        for j in range(b):
            A = b0.jacobian(y)
            dW = sdt * Z[j]
            ye = ye + b0(ye) * dt + s2e * dW
            xi = xi + (xi @ A.T) * dt + dW
            y = y + b0(y) * dt
            k += 1
            if k in checks:
                z = y + s2e * xi
                gaps.append(float(np.mean(np.sum((ye - z) ** 2, axis=1) ** 2)))
    z = y + s2e * xi
    gap = float(np.mean(np.sum((ye - z) ** 2, axis=1) ** 2))
    C = np.atleast_2d(np.cov((ye - mx).T))
    Hinv = np.linalg.inv(b0.H)
    target = 2 * eps * Hinv
    return {
        "kind": "mixing", "eps": eps, "theta_exp": theta_exp, "t_eps": t_eps, "dt": dt,
        "n_paths": n_paths, "r5": b0.r5, "x0": x0.tolist(),
        "gap4": gap, "gap4_sup": max(gaps + [gap]),
        "cov": C.tolist(),
        "cov_rel_err_2epsHinv": float(np.linalg.norm(C - target) / np.linalg.norm(target)),
        "cov_rel_err_epsHinv": float(np.linalg.norm(C - target / 2) / np.linalg.norm(target / 2)),
        "mean_offset": float(np.linalg.norm(ye.mean(axis=0) - mx)),
    }


def fit_power(eps_values, gaps):
    """Slope of log gap against log eps from two or more points."""
    le, lg = np.log(eps_values), np.log(gaps)
    return float(np.polyfit(le, lg, 1)[0])


def _nu_star(graph):
    umin = min(m.u for m in graph.minima)
    return sum(1.0 / np.sqrt(np.linalg.det(graph.spec.hess(m.x)))
               for m in graph.minima if abs(m.u - umin) <= 1e-9), umin


def _well_interval(spec, m, level, rho):
    """End points of the component of {U <= level} containing the 1D minimum m (within rho)."""
    f = lambda x: spec.U(np.array([x])) - level
    ends = []
    for s in (-1.0, 1.0):
        far = float(np.clip(m + s * rho, spec.box[0, 0], spec.box[0, 1]))
        if f(far) <= 0:
            ends.append(far)
        else:
            ends.append(optimize.brentq(f, m, far, xtol=1e-14))
    return ends


def _quad1(f, a, b, points):
    pts = [p for p in points if a < p < b]
    val, err = integrate.quad(f, a, b, points=pts or None, limit=500, epsabs=0, epsrel=1e-12)
    if not np.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
        raise QuadratureFailure(f"quad error {err:g} on [{a}, {b}]")
    return val


def _quad2(f, box, centers):
    # split the box at the minima so the peaks sit on panel edges
    xs = sorted(set([box[0, 0], box[0, 1]] + [c[0] for c in centers if box[0, 0] < c[0] < box[0, 1]]))
    ys = sorted(set([box[1, 0], box[1, 1]] + [c[1] for c in centers if box[1, 0] < c[1] < box[1, 1]]))
    tot = 0.0
    for a, b in zip(xs[:-1], xs[1:]):
        for c, d in zip(ys[:-1], ys[1:]):
            val, err = integrate.dblquad(lambda y, x: f(np.array([x, y])), a, b, c, d,
                                         epsabs=0, epsrel=1e-10)
            if not np.isfinite(val):
                raise QuadratureFailure("2D quadrature diverged")
            tot += val
    return tot


def _well_mass_2d(spec, m, level, rho, weight):
    rho = min(rho, float(np.min(np.minimum(m - spec.box[:, 0], spec.box[:, 1] - m))))
    def radius(th):
        e = np.array([np.cos(th), np.sin(th)])
        f = lambda r: spec.U(m + r * e) - level
        if f(rho) <= 0:
            return rho
        return optimize.brentq(f, 1e-12, rho, xtol=1e-13)
    val, _ = integrate.dblquad(lambda r, th: r * weight(m + r * np.array([np.cos(th), np.sin(th)])),
                               0.0, 2 * np.pi, 0.0, radius, epsabs=0, epsrel=1e-10)
    return val


def _minima_view(spec):
    # enough of a landscape graph for the quadrature checks; also covers single-well potentials
    cps = find_critical_points(spec)
    minima = [c for c in cps if c.index == 0]
    return SimpleNamespace(spec=spec, critical_points=cps, minima=minima,
                           minima_ids=[m.id for m in minima], d1=float("nan"))


def gibbs_checks(graph, eps_list=(0.2, 0.1, 0.05), r0=None):
    """Partition function and well masses by quadrature vs Laplace asymptotics.

    Returns per-eps ratios Z / ((2 pi eps)^{d/2} nu_star) and, per minimum,
    mu(E(m)) exp(U(m)/eps) / (nu(m) / nu_star).
    """
    if isinstance(graph, PotentialSpec):
        graph = _minima_view(graph)
        r0 = 1.0 if r0 is None else r0
    spec = graph.spec
    d = spec.dim
    if d > 2:
        raise ValueError("quadrature checks support d <= 2")
    wells = WellSet(graph, r0)
    nu_star, umin = _nu_star(graph)
    rows = []
    for eps in eps_list:
        w = lambda x, eps=eps: float(np.exp(-(spec.U(np.atleast_1d(x)) - umin) / eps))
        if d == 1:
            Z = _quad1(lambda x: w(np.array([x])), spec.box[0, 0], spec.box[0, 1],
                       [m.x[0] for m in graph.minima])
        else:
            Z = _quad2(w, spec.box, [m.x for m in graph.minima])
        zr = Z / ((2 * np.pi * eps) ** (d / 2) * nu_star)
        masses = {}
        for k, m in enumerate(graph.minima):
            if d == 1:
                a, b = _well_interval(spec, m.x[0], wells.levels[k], wells.rho[k])
                mass = _quad1(lambda x: w(np.array([x])), a, b, [m.x[0]])
            else:
                mass = _well_mass_2d(spec, m.x, wells.levels[k], wells.rho[k], w)
            mu = mass / Z * np.exp((m.u - umin) / eps)
            nu = 1.0 / np.sqrt(np.linalg.det(spec.hess(m.x)))
            masses[str(m.id)] = float(mu / (nu / nu_star))
        rows.append({"eps": eps, "Z": Z, "Z_ratio": float(zr), "well_ratio": masses})
    zr = [abs(r["Z_ratio"] - 1) for r in rows]
    monotone = all(zr[i + 1] <= zr[i] + 1e-12 for i in range(len(zr) - 1))
    return {"kind": "gibbs", "nu_star": nu_star, "rows": rows, "Z_monotone": bool(monotone),
            "r0": wells.r0}


def saddle_exit_experiment(graph, saddle_id=None, eps=0.05, n_paths=200, dt=None, seed=0,
                           start_dist=1e-3, radius=None, time_factor=5.0, quantile=0.95,
                           threads=1, backend=None):
    """Paths started next to a saddle: fraction still in the ball after time_factor / eps, exit heights.

    eta0 is measured as minus the ``quantile`` of U(exit) - U(sigma).
    """
    spec = graph.spec
    s = graph.saddles[0] if saddle_id is None else graph.point(saddle_id)
    if radius is None:
        others = [np.linalg.norm(c.x - s.x) for c in graph.critical_points if c.id != s.id]
        radius = 0.5 * min(others)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_paths, spec.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    X0 = s.x + start_dist * dirs
    cfg = SimConfig(eps=eps, dt=dt if dt is not None else default_dt(eps), horizon=time_factor / eps,
                    n_paths=n_paths, seed=seed, threads=threads, backend=backend)
    res = run_ensemble(spec, cfg, X0, None, ball=(s.x, radius))
    stayed = np.mean([r.status != "left_ball" for r in res.records])
    exits = np.array([r.terminal for r in res.records if r.status == "left_ball"])
    dh = spec.U(exits) - s.u if len(exits) else np.array([np.inf])
    eta0 = float(-np.quantile(dh, quantile))
    return {
        "kind": "saddle_exit", "saddle": s.id, "eps": eps, "radius": radius, "n_paths": n_paths,
        "fraction_inside": float(stayed), "eta0": eta0,
        "fraction_below_eta0": float(np.mean(dh < -eta0)) if eta0 > 0 else 0.0,
        "exit_height_drop_median": float(-np.median(dh)),
    }, res


def hitting_wells_experiment(graph, eps=0.05, H=None, n_starts=100, dt=None, seed=0, r0=None,
                             time_factor=10.0, threads=1, backend=None):
    """Uniform starts in {U <= H} (inside the box): fraction not in any well by time_factor / eps."""
    spec = graph.spec
    heights = sorted(c.u for c in graph.critical_points)
    if H is None:
        top = max(s.u for s in graph.saddles)
        above = [h for h in heights if h > top + 1e-9]
        H = top + (0.5 * (above[0] - top) if above else 0.5)
    if any(abs(h - H) < 1e-9 for h in heights):
        raise ValueError("H must not be a critical value")
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n_starts:
        X = rng.uniform(spec.box[:, 0], spec.box[:, 1], size=(4 * n_starts, spec.dim))
        pts.extend(X[spec.U(X) <= H])
    X0 = np.array(pts[:n_starts])
    wells = WellSet(graph, r0)
    cfg = SimConfig(eps=eps, dt=dt if dt is not None else default_dt(eps), horizon=time_factor / eps,
                    n_paths=n_starts, seed=seed, well_r0=wells.r0, threads=threads, backend=backend)
    res = run_ensemble(spec, cfg, X0, wells, stop=list(wells.ids))
    failed = [r.status != "target" for r in res.records]
    times = [r.time for r in res.records if r.status == "target"]
    return {"kind": "hitting_wells", "eps": eps, "H": H, "n_starts": n_starts,
            "failure_fraction": float(np.mean(failed)),
            "max_time": float(max(times)) if times else None}, res
