"""Linear analysis at critical points.

Near a saddle: the stable/unstable split of the drift Jacobian and exits
of the linear flow from a ball.  Near a minimum: the Lyapunov certificate
and the radially linearized extension b0 of the drift.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ImaginaryAxisEigen, NoExit, NoValidRadius, UnstableA
from .landscape import TOL_SPEC

__all__ = [
    "LinearSaddleModel",
    "LyapunovCertificate",
    "split_manifolds",
    "linear_exit",
    "distance_to_unstable_sphere",
    "find_exit_radius",
    "solve_lyapunov",
    "B0Field",
    "extend_field_b0",
]


@dataclass
class LinearSaddleModel:
    A: np.ndarray
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    r1: float = 1.0

    @property
    def dims(self):
        return self.stable_basis.shape[1], self.unstable_basis.shape[1]

    def unstable_projector(self):
        Q = self.unstable_basis
        return Q @ Q.T


@dataclass
class LyapunovCertificate:
    K: np.ndarray
    residual: float

    @property
    def min_eig(self):
        return float(np.linalg.eigvalsh(self.K).min())


def split_manifolds(A, r1=1.0, tol_spec=TOL_SPEC):
    """Orthonormal bases of the stable and unstable subspaces of ``A``.

    Sorted real Schur forms give the two invariant subspaces directly; this is
    the same split as the real Jordan grouping but numerically stable.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    ev = np.linalg.eigvals(A)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.any(np.abs(ev.real) <= tol_spec * scale):
        raise ImaginaryAxisEigen(f"A is not hyperbolic: eigenvalues {ev}")
    _, Zs, ks = linalg.schur(A, output="real", sort="lhp")
    _, Zu, ku = linalg.schur(A, output="real", sort="rhp")
    assert ks + ku == d
    return LinearSaddleModel(A, Zs[:, :ks], Zu[:, :ku], float(r1))


def linear_exit(A, model, z0, r1=None, dt=None, max_time=None, xtol=1e-12):
    """Exit point of x' = A x from the ball B(0, r1), started at ``z0``.

    Uses the exact flow exp(tA); the first crossing of |x| = r1 is bracketed
    on a time grid and refined by bisection to ``xtol`` in time.

    Raises
    ------
    NoExit
        The trajectory contracts below 1e-3 |z0| or does not leave in ``max_time``.
    """
    A = np.asarray(A, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    r1 = model.r1 if r1 is None else r1
    nz = np.linalg.norm(z0)
    if nz == 0 or nz >= r1:
        raise ValueError("need 0 < |z0| < r1")
    rate = float(np.max(np.abs(np.linalg.eigvals(A))))
    if dt is None:
        dt = 0.05 / rate
    if max_time is None:
        growth = max(float(np.max(np.linalg.eigvals(A).real)), 1e-12)
        max_time = (np.log(r1 / nz) + 40.0) / growth
    step = linalg.expm(dt * A)
    x, t = z0.copy(), 0.0
    while t < max_time:
        xn = step @ x
        if np.linalg.norm(xn) >= r1:
            a, b = 0.0, dt
            while b - a > xtol:
                c = 0.5 * (a + b)
                if np.linalg.norm(linalg.expm(c * A) @ x) >= r1:
                    b = c
                else:
                    a = c
            y = linalg.expm(b * A) @ x
            return y * (r1 / np.linalg.norm(y))
        x, t = xn, t + dt
        if np.linalg.norm(x) < 1e-3 * nz:
            raise NoExit("trajectory contracts: start lies on the stable manifold")
    raise NoExit(f"no exit within time {max_time:g}")


def distance_to_unstable_sphere(model, x, r1=None):
    """Distance from ``x`` to the unstable subspace intersected with the sphere |y| = r1."""
    r1 = model.r1 if r1 is None else r1
    p = model.unstable_projector() @ np.asarray(x, dtype=float)
    npn = np.linalg.norm(p)
    if npn == 0:
        return float(np.hypot(np.linalg.norm(x), r1))
    return float(np.linalg.norm(x - r1 * p / npn))


def _ball_samples(rng, n, d, radius):
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * radius * rng.uniform(0, 1, n)[:, None] ** (1.0 / d)


def find_exit_radius(model, a, n_samples=200, seed=0, r_start=None, max_halvings=40):
    """Empirical r(a): largest tested radius such that all sampled exits land within ``a``.

    Samples include near-stable starts (unstable component 1e-6 of the radius)
    in addition to uniform starts in the ball.
    """
    rng = np.random.default_rng(seed)
    d = model.A.shape[0]
    r = 0.5 * model.r1 if r_start is None else r_start
    Qs, Qu = model.stable_basis, model.unstable_basis
    for _ in range(max_halvings):
        Z = _ball_samples(rng, n_samples, d, r)
        if Qu.shape[1] and Qs.shape[1]:
            k = max(1, n_samples // 10)
            cs = rng.standard_normal((k, Qs.shape[1]))
            cs *= 0.9 * r / np.linalg.norm(cs, axis=1, keepdims=True)
            cu = rng.standard_normal((k, Qu.shape[1]))
            cu *= 1e-6 * r / np.linalg.norm(cu, axis=1, keepdims=True)
            Z = np.vstack([Z, cs @ Qs.T + cu @ Qu.T])
        ok = True
        for z in Z:
            try:
                e = linear_exit(model.A, model, z)
            except NoExit:
                continue
            if distance_to_unstable_sphere(model, e) >= a:
                ok = False
                break
        if ok:
            return r
        r *= 0.5
    raise NoExit(f"no radius found for a = {a:g}")


def solve_lyapunov(A):
    """K with A^T K + K A = -I via the Kronecker-product linear system.

    Raises
    ------
    UnstableA
        If some eigenvalue of A has nonnegative real part.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise UnstableA("A must be Hurwitz")
    I = np.eye(d)
    # column-major vec: vec(A^T K) = (I kron A^T) vec K, vec(K A) = (A^T kron I) vec K
    M = np.kron(I, A.T) + np.kron(A.T, I)
    k = np.linalg.solve(M, -I.reshape(-1, order="F"))
    K = k.reshape(d, d, order="F")
    K = 0.5 * (K + K.T)
    res = float(np.linalg.norm(A.T @ K + K @ A + I))
    return LyapunovCertificate(K, res)


class B0Field:
    """Drift b inside B(m, r5), radially linearized outside.

    Coordinates are absolute (not shifted to the minimum).
    """

    def __init__(self, spec, m, r5):
        self.spec = spec
        self.m = np.asarray(m, dtype=float)
        self.r5 = float(r5)
        self.H = spec.hess(self.m)
        self.Lmat = spec.jac_ell(self.m)
        self.A = -(self.H + self.Lmat)

    def _proj(self, Y):
        n = np.linalg.norm(Y, axis=-1, keepdims=True)
        out = n > self.r5
        R = np.where(out, Y * (self.r5 / np.where(n == 0, 1.0, n)), Y)
        return R, out[..., 0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        Y = X - self.m
        R, out = self._proj(Y)
        B = self.spec.drift(R + self.m)
        if np.any(out):
            J = self.spec.jac_drift(R[out] + self.m)
            B[out] = B[out] + np.einsum("nij,nj->ni", J, Y[out] - R[out])
        return B[0] if x.ndim == 1 else B

    def jacobian(self, x, h=1e-6):
        """Db0: exact inside the ball, central differences outside."""
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        inside = np.linalg.norm(X - self.m, axis=-1) <= self.r5 * (1 - 1e-9)
        J = np.empty(X.shape + (X.shape[1],))
        if np.any(inside):
            J[inside] = self.spec.jac_drift(X[inside])
        for k in np.flatnonzero(~inside):
            for j in range(X.shape[1]):
                e = np.zeros(X.shape[1])
                e[j] = h
                J[k, :, j] = (self(X[k] + e) - self(X[k] - e)) / (2 * h)
        return J[0] if x.ndim == 1 else J

    def contraction_margin(self, x):
        """-b0(x).H(x-m) - |H(x-m)|^2 / 2; nonnegative where the contraction holds."""
        X = np.atleast_2d(np.asarray(x, dtype=float))
        HY = (X - self.m) @ self.H.T
        return -np.sum(self(X) * HY, axis=-1) - 0.5 * np.sum(HY * HY, axis=-1)

    def growth_constant(self, n=2048, seed=0):
        """C1 with |b0(x)| <= C1 |x - m| outside the ball, from the sphere |x - m| = r5."""
        rng = np.random.default_rng(seed)
        d = len(self.m)
        U = rng.standard_normal((n, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        if d == 1:
            U = np.array([[1.0], [-1.0]])
        R = self.m + self.r5 * U
        b = np.linalg.norm(self.spec.drift(R), axis=-1).max()
        J = max(np.linalg.norm(Jk, 2) for Jk in self.spec.jac_drift(R))
        return float(b / self.r5 + J)


def _ball_points(rng, n, d, radius, center):
    if d == 1:
        return center + rng.uniform(-radius, radius, (n, 1))
    return center + _ball_samples(rng, n, d, radius)


def extend_field_b0(spec, m, r5=None, n_check=1000, seed=0, max_halvings=30):
    """Build b0 around the minimum ``m`` (a point or CriticalPoint).

    r5 starts at a quarter of the distance to the box boundary (or the given
    value) and is halved until the local contraction inequality and the
    Jacobian-perturbation bound |K_x y| <= |H y| / 2 hold on samples of B(m, 2 r5).

    Raises
    ------
    NoValidRadius
        No radius passes within ``max_halvings`` halvings.
    """
    mx = np.asarray(getattr(m, "x", m), dtype=float)
    d = len(mx)
    rng = np.random.default_rng(seed)
    if r5 is None:
        r5 = 0.25 * float(np.min(np.minimum(mx - spec.box[:, 0], spec.box[:, 1] - mx)))
    H = spec.hess(mx)
    H0L = spec.jac_drift(mx)
    Hinv = np.linalg.inv(H)
    for _ in range(max_halvings):
        X = _ball_points(rng, n_check, d, 2 * r5, mx)
        Y = X - mx
        HY = Y @ H.T
        lhs = -np.sum(spec.drift(X) * HY, axis=-1)
        cond1 = np.all(lhs >= 0.5 * np.sum(HY * HY, axis=-1) - 1e-15)
        # |K_x y| <= |H y| / 2 for all y  <=>  ||K_x H^{-1}|| <= 1/2
        Kx = (spec.jac_drift(X) - H0L) @ Hinv
        cond2 = np.all(np.linalg.norm(Kx, ord=2, axis=(1, 2)) <= 0.5)
        if cond1 and cond2:
            return B0Field(spec, mx, r5)
        r5 *= 0.5
    raise NoValidRadius("contraction condition fails on every tested radius")
