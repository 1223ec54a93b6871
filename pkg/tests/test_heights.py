import numpy as np
import numpy.polynomial.polynomial as npoly
import pytest

from kramers import analyze
from kramers.errors import TooFewMinima
from kramers.heights import build_descent_edges, communication_heights, descend
from kramers.oracles import flood_theta
from kramers.potential import catalog

# Oracle for the asymmetric triple well: U' = 0.9 (x+2)(x+1)x(x-1.2)(x-2.2), U(0) = 0,
# integrated by numpy independently of the package; heights relative to the global minimum.
_TW_U = npoly.polyint(0.9 * npoly.polyfromroots([-2.0, -1.0, 0.0, 1.2, 2.2]))


def _tw(x):
    return npoly.polyval(x, _TW_U) - npoly.polyval(-2.0, _TW_U)


def test_descend_doublewell(dw1):
    spec = dw1.spec
    assert dw1.point(descend(spec, np.array([0.3]), dw1.minima)).x[0] == pytest.approx(1.0)
    assert dw1.point(descend(spec, np.array([-0.3]), dw1.minima)).x[0] == pytest.approx(-1.0)


def test_descend_from_minimum_is_immediate(dw1):
    m = dw1.minima[1]
    assert descend(dw1.spec, m.x.copy(), dw1.minima) == m.id


def test_descend_bowl():
    from kramers.landscape import find_critical_points
    spec = catalog("bowl", dim=2)
    cps = find_critical_points(spec)
    rng = np.random.default_rng(1)
    for x0 in rng.uniform(-1.5, 1.5, (5, 2)):
        assert descend(spec, x0, cps) == cps[0].id


def test_doublewell_edges(dw1):
    (e,) = dw1.edges
    assert sorted(round(float(dw1.point(t).x[0]), 9) for t in e.targets) == [-1.0, 1.0]
    assert not e.is_loop


def test_threewell_edges_connect_distinct_pairs(tw2):
    pairs = {frozenset(e.targets) for e in tw2.edges}
    assert len(tw2.edges) == 3 and len(pairs) == 3
    assert all(len(p) == 2 for p in pairs)


def test_doublewell_heights(dw1):
    a, b = dw1.minima_ids
    s = dw1.saddles[0].id
    assert dw1.theta[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.isneginf(np.diag(dw1.theta)))
    assert np.allclose(dw1.gamma, 1.0, atol=1e-12)
    assert dw1.d1 == pytest.approx(1.0, abs=1e-12)
    assert dw1.gates == {a: [s], b: [s]}
    assert dw1.V[a] == {b} and dw1.S[(a, b)] == {s}


def test_triplewell_against_polynomial_oracle(tw1):
    xs = [m.x[0] for m in tw1.minima]
    assert np.allclose(xs, [-2.0, 0.0, 2.2], atol=1e-9)
    u = [m.u for m in tw1.minima]
    assert np.allclose(u, [_tw(-2.0), _tw(0.0), _tw(2.2)], atol=1e-9)
    gamma = [_tw(-1.0) - _tw(-2.0), _tw(-1.0) - _tw(0.0), _tw(1.2) - _tw(2.2)]
    assert np.allclose(tw1.gamma, gamma, atol=1e-9)
    # exactly one minimum attains d1
    assert np.sum(np.isclose(tw1.gamma, tw1.d1, atol=1e-9)) == 1
    assert tw1.d1 == pytest.approx(1.011, abs=1e-9)


def test_theta_symmetric_and_ultrametric(tw2):
    T = tw2.theta.copy()
    n = len(T)
    assert np.array_equal(np.where(np.isinf(T), 0, T), np.where(np.isinf(T.T), 0, T.T))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) == 3:
                    assert T[i, j] <= max(T[i, k], T[k, j]) + 1e-12


def test_threewell_theta_vs_flood_oracle(tw2):
    ref, quantum = flood_theta(tw2.spec, [m.x for m in tw2.minima], 401)
    off = ~np.eye(len(ref), dtype=bool)
    assert np.all(np.abs(ref[off] - tw2.theta[off]) <= quantum[off] + 1e-12)


def test_single_minimum_rejected():
    with pytest.raises(TooFewMinima):
        analyze(catalog("bowl", dim=1))


def test_rotated_landscape_same_minima(tw2):
    from tests.conftest import graph_of
    rot = graph_of("threewell2d", "rot90:0.5")
    assert np.allclose([m.x for m in rot.minima], [m.x for m in tw2.minima], atol=1e-9)
    assert np.allclose(rot.theta[~np.eye(3, dtype=bool)], tw2.theta[~np.eye(3, dtype=bool)])


def test_communication_heights_from_edges(dw1):
    cps = dw1.critical_points
    edges = build_descent_edges(dw1.spec, cps)
    T = communication_heights(dw1.minima, dw1.saddles, edges)
    assert T[0, 1] == pytest.approx(1.0)
