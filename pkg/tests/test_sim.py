from types import SimpleNamespace

import numpy as np
import pytest

from kramers import assemble_chain, semigroup
from kramers.errors import NonFinite, StepSizeWarning
from kramers.landscape import find_critical_points
from kramers.potential import Polynomial, PotentialSpec, catalog
from kramers.sim import (SimConfig, TrajectoryRecord, WellSet, hitting_time, in_well, run_ensemble,
                         step_em, trace_process)
from kramers.sim.backend import available_backends
from kramers.sim.experiments import (feynman_kac_u, gibbs_checks, hitting_wells_experiment,
                                    mixing_experiment, saddle_exit_experiment)
from kramers.sim.rng import path_generator

BACKENDS = available_backends()


def _free(d=2):
    return PotentialSpec("free", d, Polynomial.zero(d), [[-5, 5]] * d)


def test_step_em_descent_without_noise():
    spec = catalog("bowl", dim=2)
    x = np.array([1.0, -0.5])
    for _ in range(100):
        y = step_em(x, spec, 0.0, 1e-2, np.ones(2))
        assert np.linalg.norm(y) < np.linalg.norm(x)
        x = y


def test_step_em_nonfinite():
    with pytest.raises(NonFinite):
        step_em(np.array([1e200]), catalog("doublewell1d"), 0.1, 1.0, np.zeros(1))


@pytest.mark.parametrize("backend", BACKENDS)
def test_brownian_scaling(backend):
    eps, dt, n = 0.1, 1e-2, 50
    with pytest.warns(StepSizeWarning):
        cfg = SimConfig(eps=eps, dt=dt, horizon=n * dt, n_paths=10_000, seed=3, backend=backend)
    res = run_ensemble(_free(), cfg, np.zeros(2))
    C = np.cov(res.terminal.T)
    target = 2 * eps * n * dt * np.eye(2)
    assert np.linalg.norm(C - target) / np.linalg.norm(target) < 0.05


def test_doublewell_exit_smoke(dw1):
    ws = WellSet(dw1)
    a, b = dw1.minima_ids
    cfg = SimConfig(eps=0.25, horizon=10 * np.exp(4.0), n_paths=4, seed=1)
    res = run_ensemble(dw1.spec, cfg, dw1.point(a).x, ws, stop=[b])
    assert any(r.status == "target" for r in res.records)


def test_in_well(dw1):
    left, right = dw1.minima_ids
    assert in_well(dw1.point(right).x, right, dw1, 0.3)
    assert not in_well(np.array([0.0]), right, dw1, 0.3)
    assert in_well(np.array([0.9]), right, dw1, 0.3)
    assert not in_well(np.array([0.9]), left, dw1, 0.3)


def test_kernel_labels_agree_with_descent(tw2):
    ws = WellSet(tw2)
    X = np.random.default_rng(0).uniform(-1.5, 1.5, (300, 2))
    lab = ws.label(X)
    for x, k in zip(X, lab):
        if k >= 0:
            assert ws.contains(x, ws.ids[k])


def test_hitting_time_cases(dw1):
    ws = WellSet(dw1)
    a, b = dw1.minima_ids
    cfg = SimConfig(eps=0.25, horizon=1.0, n_paths=2, seed=0)
    res = run_ensemble(dw1.spec, cfg, dw1.point(b).x, ws, stop=[b])
    assert all(hitting_time(r) == 0.0 for r in res.records)
    # bowl: a small sublevel set around the origin is hit by every pilot path
    bowl = catalog("bowl", dim=2)
    cps = find_critical_points(bowl)
    g = SimpleNamespace(spec=bowl, minima=cps, critical_points=cps, minima_ids=[cps[0].id], d1=1.0,
                        point=lambda i: cps[0])
    ws = WellSet(g, r0=0.05)
    cfg = SimConfig(eps=0.1, horizon=50.0, n_paths=100, seed=2)
    res = run_ensemble(bowl, cfg, np.array([1.5, 1.5]), ws, stop=[cps[0].id])
    times = [hitting_time(r) for r in res.records]
    assert all(t is not None and np.isfinite(t) for t in times)


def test_trace_process_bookkeeping():
    one = TrajectoryRecord(0, 1, [], np.zeros(1), 1, "horizon", 5.0)
    assert trace_process(one) == ([(1, 5.0)], 0.0)
    two = TrajectoryRecord(0, 0, [(1.0, -1), (1.5, 1), (3.0, -1), (3.2, 0)], np.zeros(1), 0,
                           "horizon", 4.0)
    segs, out = trace_process(two)
    assert [s[0] for s in segs] == [0, 1, 0]
    assert sum(s[1] for s in segs) + out == pytest.approx(4.0)
    assert out == pytest.approx(0.7)


def test_feynman_kac_trivial(dw1):
    cfg = SimConfig(eps=0.2, n_paths=50, seed=0)
    x0 = dw1.point(dw1.minima_ids[1]).x
    est, half = feynman_kac_u(dw1.spec, lambda X: np.ones(len(X)), x0, 0.01, cfg, dw1.theta1(0.2))
    assert est == 1.0 and half == 0.0
    u0 = lambda X: np.asarray(X)[:, 0] ** 2
    assert feynman_kac_u(dw1.spec, u0, np.array([0.3]), 0.0, cfg) == (pytest.approx(0.09), 0.0)


def test_feynman_kac_vs_reduced_chain(dw1):
    eps = 0.2
    ws = WellSet(dw1)
    right = dw1.minima_ids[1]
    cfg = SimConfig(eps=eps, n_paths=600, seed=11)
    u0 = lambda X: (ws.label(X) == ws.index(right)).astype(float)
    est, half = feynman_kac_u(dw1.spec, u0, dw1.point(right).x, 1.0, cfg, dw1.theta1(eps))
    ch = assemble_chain(dw1)
    pred = semigroup(ch, 1.0)[ch.index(right), ch.index(right)]
    assert abs(est - pred) <= half + 0.02


def test_outside_time_fraction(dw1):
    from kramers.sim.experiments import transition_law_experiment
    rep, _ = transition_law_experiment(dw1, 0.15, 1.0, n_paths=100, seed=5)
    assert rep["outside_time_fraction"] < 0.05


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")
def test_backends_bit_identical(tw2):
    ws = WellSet(tw2)
    out = {}
    for b in BACKENDS:
        cfg = SimConfig(eps=0.3, horizon=20.0, n_paths=8, seed=4, backend=b)
        res = run_ensemble(tw2.spec, cfg, tw2.point(tw2.minima_ids[0]).x, ws)
        out[b] = (res.terminal, [r.events for r in res.records], res.statuses())
    assert np.array_equal(out["cython"][0], out["python"][0])
    assert out["cython"][1:] == out["python"][1:]


def test_thread_count_invariance(dw1):
    ws = WellSet(dw1)
    runs = []
    for th in (1, 3):
        cfg = SimConfig(eps=0.25, horizon=30.0, n_paths=12, seed=9, threads=th)
        res = run_ensemble(dw1.spec, cfg, dw1.point(dw1.minima_ids[0]).x, ws)
        runs.append((res.terminal, res.events_csv_rows()))
    assert np.array_equal(runs[0][0], runs[1][0]) and runs[0][1] == runs[1][1]


def test_path_streams_independent_of_ensemble_size(dw1):
    cfg_a = SimConfig(eps=0.25, horizon=5.0, n_paths=5, seed=2)
    cfg_b = SimConfig(eps=0.25, horizon=5.0, n_paths=2, seed=2)
    x0 = dw1.point(dw1.minima_ids[0]).x
    a = run_ensemble(dw1.spec, cfg_a, x0)
    b = run_ensemble(dw1.spec, cfg_b, x0, path_offset=3)
    assert np.array_equal(a.terminal[3:], b.terminal)
    assert path_generator(2, 3).standard_normal() == path_generator(2, 3).standard_normal()


def test_mixing_bowl_exact():
    rep = mixing_experiment(catalog("bowl", dim=2), np.zeros(2), 0.05, n_paths=50)
    assert rep["gap4"] < 1e-28


def test_gibbs_bowl_exact():
    for d in (1, 2):
        rows = gibbs_checks(catalog("bowl", dim=d), eps_list=(0.05,))["rows"]
        assert rows[0]["Z_ratio"] == pytest.approx(1.0, abs=1e-9)


def test_gibbs_doublewell(dw1, dw2):
    rep = gibbs_checks(dw1)
    assert 0.9 <= rep["rows"][-1]["Z_ratio"] <= 1.1 and rep["Z_monotone"]
    # two symmetric global minima both enter nu_star
    assert rep["nu_star"] == pytest.approx(2 / np.sqrt(8))


def test_saddle_exit_and_hitting(dw2):
    rep, _ = saddle_exit_experiment(dw2, eps=0.05, n_paths=100)
    assert rep["fraction_inside"] <= 0.05 and rep["eta0"] > 0
    rep, _ = hitting_wells_experiment(dw2, eps=0.05, n_starts=50)
    assert rep["failure_fraction"] <= 0.02
