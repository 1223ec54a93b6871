"""Saddle test function p and the well test function Q built from it."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import OutsideRectangle
from .heights import TOL_GATE, descend

__all__ = [
    "SaddleFrame",
    "RectanglePartition",
    "saddle_frame",
    "eval_p",
    "eval_p_hat",
    "WellTestFunction",
    "q_partition",
    "dump_samples",
    "DEFAULT_J",
]

DEFAULT_J = 4.0


def _delta(eps):
    return float(np.sqrt(eps * np.log(1.0 / eps)))


@dataclass
class RectanglePartition:
    """Rectangles in hat coordinates: (lo, hi) per axis for A-, C and A+."""
    Aminus: np.ndarray
    C: np.ndarray
    Aplus: np.ndarray

    @property
    def R(self):
        R = self.C.copy()
        R[0] = [self.Aminus[0, 0], self.Aplus[0, 1]]
        return R


@dataclass
class SaddleFrame:
    sigma: np.ndarray
    lambdas: np.ndarray
    e_basis: np.ndarray
    v: np.ndarray
    mu: float
    J: float
    eps: float
    toward: int | None = None

    @property
    def delta(self):
        return _delta(self.eps)

    @property
    def M(self):
        return float(np.sqrt(2.0 * np.pi * self.eps / self.mu))

    @property
    def half_width(self):
        """J delta / sqrt(lambda_1)."""
        return self.J * self.delta / np.sqrt(self.lambdas[0])

    def rectangles(self):
        a, e2 = self.half_width, self.eps ** 2
        side = 2.0 * self.J * self.delta / np.sqrt(self.lambdas[1:])
        rest = np.column_stack([-side, side]) if side.size else np.zeros((0, 2))
        def box(lo, hi):
            return np.vstack([[lo, hi], rest])
        return RectanglePartition(box(-a - e2, -a), box(-a, a), box(a, a + e2))

    def to_hat(self, x):
        return (np.atleast_2d(np.asarray(x, dtype=float)) - self.sigma) @ self.e_basis

    def from_hat(self, xh):
        return self.sigma + np.atleast_2d(np.asarray(xh, dtype=float)) @ self.e_basis.T


def saddle_frame(spec, saddle, toward, eps, J=DEFAULT_J, minima=None):
    """Frame at ``saddle`` with e_1 pointing into the basin of ``toward``.

    ``toward`` is a minimum (CriticalPoint) or a position.  When ``minima``
    is given the orientation is decided by descending from sigma + a e_1;
    otherwise e_1 is oriented so that e_1 . (m - sigma) > 0.
    """
    sx = np.asarray(saddle.x, dtype=float)
    H = spec.hess(sx)
    w, V = np.linalg.eigh(H)
    if w[0] >= 0 or (len(w) > 1 and w[1] <= 0):
        raise ValueError("Hessian at a saddle must have exactly one negative eigenvalue")
    lambdas = np.concatenate([[-w[0]], w[1:]])
    e1 = V[:, 0].copy()
    m_x = np.asarray(getattr(toward, "x", toward), dtype=float)
    if minima is not None and hasattr(toward, "id"):
        a = 1e-3 * spec.diam
        try:
            hit = descend(spec, sx + a * e1, minima, r_capture=1e-2 * spec.diam)
            if hit != toward.id:
                e1 = -e1
        except Exception:
            if e1 @ (m_x - sx) < 0:
                e1 = -e1
    elif e1 @ (m_x - sx) < 0:
        e1 = -e1
    E = np.column_stack([e1, V[:, 1:]])

    Ldag = spec.jac_ell(sx).T
    ev, EV = np.linalg.eig(H - Ldag)
    k = int(np.argmin(ev.real))
    v = np.real(EV[:, k])
    v /= np.linalg.norm(v)
    if v @ e1 < 0:
        v = -v
    mu = float(-ev[k].real)
    return SaddleFrame(sx, lambdas, E, v, mu, float(J), float(eps),
                       getattr(toward, "id", None))


def _p_center(frame, X):
    t = (X - frame.sigma) @ frame.v
    # (1/M) int_{-inf}^t exp(-mu s^2 / 2 eps) ds
    return 0.5 * erfc(-t * np.sqrt(frame.mu / (2.0 * frame.eps)))


def eval_p_hat(frame, xh, strict=True):
    """p at points given in hat coordinates, shape (d,) or (n, d)."""
    xh = np.asarray(xh, dtype=float)
    XH = np.atleast_2d(xh)
    R = frame.rectangles().R
    slack = 1e-12 * max(1.0, float(np.max(np.abs(R))))
    inside = np.all((XH >= R[:, 0] - slack) & (XH <= R[:, 1] + slack), axis=1)
    if strict and not np.all(inside):
        raise OutsideRectangle(f"{int((~inside).sum())} points outside the saddle rectangle")
    a, e2 = frame.half_width, frame.eps ** 2
    h1 = XH[:, 0]
    bar = XH.copy()
    bar[:, 0] = np.clip(h1, -a, a)
    pc = _p_center(frame, frame.from_hat(bar))
    p = pc.copy()
    plus = h1 > a
    minus = h1 < -a
    p[plus] = 1.0 + (h1[plus] - a - e2) / e2 * (1.0 - pc[plus])
    p[minus] = (h1[minus] + a + e2) / e2 * pc[minus]
    # outer faces are exact, not subject to rounding in h1 -+ (a + e2)
    p[h1 >= a + e2] = 1.0
    p[h1 <= -a - e2] = 0.0
    p = np.clip(p, 0.0, 1.0)
    if not strict:
        p[~inside] = np.nan
    return float(p[0]) if xh.ndim == 1 else p


def eval_p(frame, x, strict=True):
    """p at points in the original coordinates.

    Raises
    ------
    OutsideRectangle
        If ``strict`` and some point lies outside A- u C u A+.
    """
    x = np.asarray(x, dtype=float)
    p = eval_p_hat(frame, frame.to_hat(x), strict=strict)
    return p if x.ndim > 1 else float(np.atleast_1d(p)[0])


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


REGION_W1, REGION_W2, REGION_SADDLE, REGION_OUTSIDE = "W1", "W2", "saddle", "outside"


class WellTestFunction:
    """Q for a well W (the component of {U < H} holding ``m``) and level H.

    Points are labelled W1 / W2 by the basin of attraction of the descent
    flow, inside saddle rectangles Q = p, and above H + J^2 delta^2 the value
    is multiplied by a C^2 step in U that reaches 0 at H + eta / 2.
    """

    def __init__(self, graph, m_id, H, eps, J=DEFAULT_J, eta=None, tol=TOL_GATE):
        self.graph, self.spec = graph, graph.spec
        self.eps, self.J, self.H = float(eps), float(J), float(H)
        ids = graph.minima_ids
        i = ids.index(m_id)
        self.W = sorted(mid for j, mid in enumerate(ids)
                        if j == i or graph.theta[i, j] < H - tol)
        Wset = set(self.W)
        self.saddles = []
        for e in graph.edges:
            s = graph.point(e.saddle_id)
            if abs(s.u - H) > tol or e.is_loop:
                continue
            inside = [t in Wset for t in (e.minus_target, e.plus_target)]
            if sum(inside) == 1:
                m_s = e.minus_target if inside[0] else e.plus_target
                self.saddles.append((s, m_s))
        if not self.saddles:
            raise ValueError(f"no saddle at height {H:g} separates the well of {m_id}")
        self.frames = [saddle_frame(self.spec, s, graph.point(ms), eps, J, graph.minima)
                       for s, ms in self.saddles]
        if eta is None:
            heights = np.array([c.u for c in graph.critical_points])
            above = heights[heights > H + tol] - H
            eta = 0.5 * float(above.min()) if above.size else 1.0
        self.eta = float(eta)
        self.level_hi = H + 0.5 * self.eta
        self.level_lo = H + min(self.J ** 2 * _delta(eps) ** 2, 0.25 * self.eta)

    def _basin_value(self, x):
        try:
            m = descend(self.spec, x, self.graph.minima, r_capture=1e-2 * self.spec.diam)
        except Exception:
            return 0.0
        return 1.0 if m in self.W else 0.0

    def classify(self, X):
        """(labels, Q) for points X of shape (n, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        u = self.spec.U(X)
        q = np.empty(len(X))
        labels = []
        for k, x in enumerate(X):
            val, lab = None, None
            if u[k] <= self.level_hi:
                for f in self.frames:
                    p = eval_p(f, x, strict=False)
                    if np.isfinite(p):
                        val, lab = p, REGION_SADDLE
                        break
                if val is None:
                    val = self._basin_value(x)
                    lab = REGION_W1 if val == 1.0 else REGION_W2
                if u[k] > self.level_lo:
                    lab = REGION_OUTSIDE
            else:
                val, lab = 0.0, REGION_OUTSIDE
            step = 1.0 - _smoothstep((u[k] - self.level_lo) / (self.level_hi - self.level_lo))
            q[k] = val * step
            labels.append(lab)
        return labels, q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _, q = self.classify(x)
        return q if x.ndim > 1 else float(q[0])

    def fd_gradient_norm(self, X, h=None):
        """Central-difference |grad Q| at each point of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        h = 1e-2 * np.sqrt(self.eps) if h is None else h
        out = np.zeros(len(X))
        for j in range(X.shape[1]):
            e = np.zeros(X.shape[1])
            e[j] = h
            out += ((self(X + e) - self(X - e)) / (2 * h)) ** 2
        return np.sqrt(out)

    def gradient_jumps(self, X, h=None, factor=10.0):
        """Points where the FD gradient exceeds ``factor`` / sqrt(eps): the jump set."""
        g = self.fd_gradient_norm(X, h)
        return np.atleast_2d(X)[g * np.sqrt(self.eps) > factor]


def q_partition(graph, m_id, H, eps, J=DEFAULT_J, eta=None):
    """Build the well test function Q for the well of ``m_id`` at level H."""
    return WellTestFunction(graph, m_id, H, eps, J=J, eta=eta)


def dump_samples(path, X, values, labels):
    """Write a CSV with columns x0..x{d-1}, p, label."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(d)] + ["p", "label"])
        for x, v, lab in zip(X, values, labels):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v)), lab])
