from types import SimpleNamespace

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from kramers import long_time_structure, semigroup, solve_resolvent
from kramers.heights import DescentEdge, communication_heights
from kramers.testfn import SaddleFrame, eval_p_hat


@st.composite
def landscapes(draw):
    n = draw(st.integers(2, 6))
    um = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    minima = [SimpleNamespace(id=i, u=u) for i, u in enumerate(um)]
    # spanning tree plus extra edges, saddles above both endpoints
    pairs = [(draw(st.integers(0, k - 1)), k) for k in range(1, n)]
    pairs += draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4))
    saddles, edges = [], []
    for j, (a, b) in enumerate(pairs):
        sid = n + j
        h = max(um[a], um[b]) + draw(st.floats(0.01, 2))
        saddles.append(SimpleNamespace(id=sid, u=h))
        edges.append(DescentEdge(sid, a, b, np.zeros(1)))
    return minima, saddles, edges


def _minimax_oracle(n, saddles, edges):
    """Floyd-Warshall on (min over paths of max saddle height)."""
    h = {s.id: s.u for s in saddles}
    T = np.full((n, n), np.inf)
    for e in edges:
        a, b = e.minus_target, e.plus_target
        if a != b:
            T[a, b] = T[b, a] = min(T[a, b], h[e.saddle_id])
    for k in range(n):
        T = np.minimum(T, np.maximum(T[:, [k]], T[[k], :]))
    np.fill_diagonal(T, -np.inf)
    return T


@settings(max_examples=150, deadline=None)
@given(landscapes())
def test_theta_matches_minimax_and_is_ultrametric(data):
    minima, saddles, edges = data
    n = len(minima)
    T = communication_heights(minima, saddles, edges)
    assert np.array_equal(T, _minimax_oracle(n, saddles, edges))
    off = ~np.eye(n, dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j:
                via = [max(T[i, k], T[k, j]) for k in range(n) if k not in (i, j)]
                assert all(T[i, j] <= v for v in via)
    assert np.all(T[off] >= 0)


@st.composite
def generators(draw):
    n = draw(st.integers(1, 5))
    rates = draw(st.lists(st.floats(0, 3), min_size=n * n, max_size=n * n))
    L = np.array(rates).reshape(n, n)
    np.fill_diagonal(L, 0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


@settings(max_examples=100, deadline=None)
@given(generators(), st.floats(0, 3), st.floats(0, 3))
def test_semigroup_property(L, s, t):
    Ps, Pt, Pst = semigroup(L, s), semigroup(L, t), semigroup(L, s + t)
    assert np.allclose(Ps @ Pt, Pst, atol=1e-10)
    assert np.all(Pst >= -1e-12)
    assert np.abs(Pst.sum(axis=1) - 1).max() < 1e-12


@settings(max_examples=100, deadline=None)
@given(generators(), st.floats(0.1, 10))
def test_resolvent_is_positive_and_conservative(L, lam):
    n = len(L)
    f = solve_resolvent(L, lam, np.ones(n))
    assert np.allclose(f, 1 / lam, rtol=1e-10)
    e0 = np.zeros(n)
    e0[0] = 1
    assert np.all(solve_resolvent(L, lam, e0) >= -1e-12)


@settings(max_examples=100, deadline=None)
@given(generators())
def test_long_time_rows_are_distributions(L):
    cs = long_time_structure(L)
    P = cs.limit_matrix(len(L))
    assert np.allclose(P.sum(axis=1), 1, atol=1e-9)
    assert np.allclose(P @ L, 0, atol=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.005, 0.2), st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 8), st.floats(0.5, 8))
def test_p_bounded_and_monotone_in_h1(eps, u, w, lam1, lam2):
    f = SaddleFrame(np.zeros(2), np.array([lam1, lam2]), np.eye(2), np.array([1.0, 0.0]),
                    lam1, 4.0, eps)
    a = f.half_width + eps ** 2
    h = np.column_stack([np.sort(np.array([u, w]) * a), np.zeros(2)])
    p = eval_p_hat(f, h)
    assert np.all((p >= 0) & (p <= 1))
    assert p[1] >= p[0]
