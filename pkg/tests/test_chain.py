import numpy as np
import pytest
from scipy.linalg import expm

from kramers import assemble_chain, long_time_structure, semigroup, solve_resolvent
from kramers.chain import ReducedChain, resolvent_by_quadrature
from tests.conftest import graph_of

R = 2 * np.sqrt(2) / np.pi


def test_doublewell_hand_values(dw1):
    ch = assemble_chain(dw1)
    assert np.allclose(ch.nu, 1 / np.sqrt(8), atol=1e-12)
    assert list(ch.saddle_omega.values())[0] == pytest.approx(1 / np.pi, abs=1e-12)
    assert np.allclose(ch.L, [[-R, R], [R, -R]], atol=1e-12)


def test_rotation_limit_continuity():
    L0 = assemble_chain(graph_of("doublewell2d")).L
    prev = None
    for c in (0.4, 0.1, 0.01):
        L = assemble_chain(graph_of("doublewell2d", f"rot90:{c}")).L
        err = np.abs(L - L0).max()
        if prev is not None:
            assert err < prev
        prev = err
    assert prev < 1e-3


def test_rotation_speeds_up_exit():
    # mu grows with the rotation while nu is unchanged
    L0 = assemble_chain(graph_of("doublewell2d")).L
    L5 = assemble_chain(graph_of("doublewell2d", "rot90:0.5")).L
    assert L5[0, 1] > L0[0, 1]


def test_semigroup(dw1):
    ch = assemble_chain(dw1)
    assert np.array_equal(semigroup(ch, 0.0), np.eye(2))
    for t in (0.1, 1.0, 10.0):
        assert np.abs(semigroup(ch, t).sum(axis=1) - 1).max() <= 1e-12
    assert np.allclose(semigroup(ch, 50.0), 0.5, atol=1e-12)
    assert np.allclose(semigroup(ch, 0.7), expm(0.7 * ch.L), atol=1e-14)


def test_resolvent_cases(dw1, tw1):
    ch = assemble_chain(dw1)
    assert np.allclose(solve_resolvent(ch, 2.0, np.full(2, 3.0)), 1.5, atol=1e-14)
    f = solve_resolvent(ch, 1.0, np.array([1.0, 0.0]))
    assert np.allclose(f, [(1 + R) / (1 + 2 * R), R / (1 + 2 * R)], atol=1e-14)
    g = np.array([1.0, -2.0, 0.5])
    lam = 1e6
    f3 = solve_resolvent(assemble_chain(tw1), lam, g)
    assert np.allclose(lam * f3, g, rtol=1e-4)


def test_resolvent_duality(tw1):
    ch = assemble_chain(tw1)
    g = np.array([0.2, 1.0, -0.4])
    for lam in (0.5, 2.0):
        assert np.abs(solve_resolvent(ch, lam, g) - resolvent_by_quadrature(ch, lam, g)).max() < 1e-6


def test_long_time_symmetric(dw1):
    ch = assemble_chain(dw1)
    cs = long_time_structure(ch)
    assert cs.classes == [[0, 1]] and cs.transient == []
    assert np.allclose(cs.pis[0], 0.5)


def test_long_time_single_jump():
    L = np.array([[-1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cs = long_time_structure(L)
    assert cs.classes == [[1], [2]] and cs.transient == [0]
    assert cs.absorption[0].tolist() == [1.0, 0.0]


def test_triplewell_limit(tw1):
    ch = assemble_chain(tw1)
    cs = long_time_structure(ch)
    t = 1e6 / np.abs(ch.L).max()
    assert np.abs(semigroup(ch, t) - cs.limit_matrix(3)).max() < 1e-8
    # only the shallowest well has outgoing rate
    assert np.count_nonzero(ch.L) == 2


def test_chain_json_round_trip(tw2):
    ch = assemble_chain(tw2)
    back = ReducedChain.from_json(ch.to_json())
    assert np.array_equal(back.L, ch.L) and back.states == ch.states
