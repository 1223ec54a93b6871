import numpy as np
import pytest

from kramers.errors import ImaginaryAxisEigen, NoExit, NoValidRadius, UnstableA
from kramers.local import (distance_to_unstable_sphere, extend_field_b0, find_exit_radius,
                           linear_exit, solve_lyapunov, split_manifolds)
from kramers.potential import catalog


def _span_eq(B, v):
    """v lies in the column span of B."""
    P = B @ np.linalg.pinv(B)
    return np.allclose(P @ v, v, atol=1e-12)


def test_split_diagonal():
    m = split_manifolds(np.diag([-1.0, 2.0]))
    assert m.dims == (1, 1)
    assert _span_eq(m.stable_basis, np.array([1.0, 0.0]))
    assert _span_eq(m.unstable_basis, np.array([0.0, 1.0]))


def test_split_fully_stable():
    m = split_manifolds(-np.eye(3))
    assert m.dims == (3, 0)


def test_split_non_hyperbolic():
    with pytest.raises(ImaginaryAxisEigen):
        split_manifolds(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_split_rotated_saddle_direction():
    spec = catalog("doublewell2d", ell="rot90:0.5")
    A = spec.jac_drift(np.zeros(2))
    m = split_manifolds(A)
    assert m.dims == (1, 1)
    w, V = np.linalg.eig(A)
    v = np.real(V[:, np.argmax(w.real)])
    u = m.unstable_basis[:, 0]
    angle = np.arccos(min(1.0, abs(u @ v) / np.linalg.norm(v)))
    assert angle < 1e-8


def test_linear_exit_unstable_axis():
    A = np.diag([-1.0, 2.0])
    m = split_manifolds(A)
    assert np.allclose(linear_exit(A, m, np.array([0.0, 0.1])), [0.0, 1.0], atol=1e-9)
    assert np.allclose(linear_exit(A, m, np.array([0.0, -0.1])), [0.0, -1.0], atol=1e-9)


def test_linear_exit_near_stable_start():
    A = np.diag([-1.0, 2.0])
    m = split_manifolds(A)
    r = find_exit_radius(m, 0.05)
    z0 = np.array([0.9 * r, 1e-6 * r])
    e = linear_exit(A, m, z0)
    assert distance_to_unstable_sphere(m, e) < 0.05


def test_linear_exit_stable_start_raises():
    A = np.diag([-1.0, 2.0])
    with pytest.raises(NoExit):
        linear_exit(A, split_manifolds(A), np.array([0.5, 0.0]))


def test_lyapunov_cases():
    assert np.allclose(solve_lyapunov(-np.eye(3)).K, 0.5 * np.eye(3), atol=1e-14)
    H = np.array([[3.0, 1.0], [1.0, 2.0]])
    assert np.allclose(solve_lyapunov(-H).K, 0.5 * np.linalg.inv(H), atol=1e-14)
    with pytest.raises(UnstableA):
        solve_lyapunov(np.diag([-1.0, 1.0]))


def test_lyapunov_rotated():
    spec = catalog("doublewell2d", ell="rot90:0.5")
    A = spec.jac_drift(np.array([1.0, 0.0]))
    cert = solve_lyapunov(A)
    assert cert.residual <= 1e-10
    assert cert.min_eig > 0
    assert np.allclose(A.T @ cert.K + cert.K @ A, -np.eye(2), atol=1e-10)


def test_b0_inside_equals_drift():
    spec = catalog("doublewell1d")
    b0 = extend_field_b0(spec, np.array([1.0]))
    X = 1.0 + np.linspace(-b0.r5, b0.r5, 11)[:, None]
    assert np.array_equal(b0(X), spec.drift(X))


def test_b0_linear_for_quadratic():
    spec = catalog("bowl", dim=2)
    b0 = extend_field_b0(spec, np.zeros(2))
    X = np.random.default_rng(0).uniform(-2, 2, (50, 2))
    assert np.allclose(b0(X), spec.drift(X), atol=1e-13)


def test_b0_growth_bound():
    spec = catalog("doublewell1d")
    b0 = extend_field_b0(spec, np.array([1.0]))
    C = b0.growth_constant()
    for r in (3 * b0.r5, 10 * b0.r5):
        for s in (-1, 1):
            x = np.array([1.0 + s * r])
            assert np.linalg.norm(b0(x)) <= C * r
    X = 1.0 + np.linspace(-2 * b0.r5, 2 * b0.r5, 101)[:, None]
    assert np.all(b0.contraction_margin(X) >= -1e-15)


def test_b0_no_radius():
    # away from a critical point -b.H(x-m) changes sign, so no radius works
    spec = catalog("doublewell1d")
    with pytest.raises(NoValidRadius):
        extend_field_b0(spec, np.array([1.5]), max_halvings=20)
