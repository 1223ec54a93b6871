import numpy as np
import pytest

from kramers import find_critical_points, resolve_potential, verify_field_conditions
from kramers.errors import UnknownPotential
from kramers.landscape import classify_saddle_mu
from kramers.oracles import grid_critical_cells
from kramers.potential import Polynomial, PotentialSpec, catalog, load_potential


def test_doublewell_critical_points():
    cps = find_critical_points(catalog("doublewell1d"))
    got = sorted((round(float(c.x[0]), 10), round(c.u, 10), c.index) for c in cps)
    assert got == [(-1.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 0)]


def test_bowl_single_minimum():
    for d in (1, 2, 3):
        cps = find_critical_points(catalog("bowl", dim=d))
        assert len(cps) == 1
        assert cps[0].index == 0
        assert np.allclose(cps[0].x, 0.0, atol=1e-12)


def test_threewell_counts_match_grid_oracle():
    spec = catalog("threewell2d")
    cps = find_critical_points(spec)
    counts = np.bincount([c.index for c in cps], minlength=3)
    assert counts.tolist() == [3, 3, 1]
    # every Newton root sits in a grid cell where both gradient components change sign
    cells = grid_critical_cells(spec, 401)
    for c in cps:
        assert min(np.linalg.norm(cells - c.x, axis=1)) < 2 * 4.0 / 400


def test_mu_gradient_case_is_minus_lambda1():
    spec = catalog("threewell2d")
    for c in find_critical_points(spec):
        if c.index == 1:
            assert classify_saddle_mu(c, spec) == pytest.approx(-c.hess_eigvals[0], rel=1e-12)


def test_mu_doublewell():
    c = [c for c in find_critical_points(catalog("doublewell1d")) if c.index == 1][0]
    assert classify_saddle_mu(c, catalog("doublewell1d")) == pytest.approx(4.0, abs=1e-9)


def test_mu_rotated_matches_direct_eigensolve():
    spec = catalog("doublewell2d", ell="rot90:0.5")
    c = [c for c in find_critical_points(spec) if c.index == 1][0]
    # saddle at origin: H = diag(-4, 3), rot90 Jacobian c * R H with R = [[0,-1],[1,0]]
    H = np.diag([-4.0, 3.0])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    M = -(H + 0.5 * R @ H)
    mu = max(np.linalg.eigvals(M).real)
    assert classify_saddle_mu(c, spec) == pytest.approx(mu, rel=1e-10)


def test_field_conditions():
    assert verify_field_conditions(catalog("doublewell1d")).max_div == 0.0
    rep = verify_field_conditions(catalog("threewell2d", ell="rot90:0.5"))
    assert rep.passed
    base = catalog("threewell2d")
    broken = catalog("threewell2d", ell=[base.poly.deriv(k).to_json() for k in range(2)])
    bad = verify_field_conditions(broken)
    assert not bad.passed and bad.max_orth > 1.0


def test_unknown_potential_lists_catalog():
    with pytest.raises(UnknownPotential) as exc:
        resolve_potential("nope")
    assert "doublewell1d" in str(exc.value)


def test_potential_json_round_trip(tmp_path):
    spec = catalog("threewell2d", ell="rot90:0.5")
    back = load_potential(spec.to_json())
    x = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    assert np.array_equal(back.U(x), spec.U(x))
    assert np.allclose(back.drift(x), spec.drift(x), rtol=0, atol=1e-14)


def test_polynomial_derivative():
    p = Polynomial.from_1d([0, 0, -2, 0, 1])  # x^4 - 2x^2
    dp = p.deriv(0)
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.allclose(dp(x), 4 * x[:, 0] ** 3 - 4 * x[:, 0])
