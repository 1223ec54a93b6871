"""Critical points of the potential and the structural checks on (U, ell)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import (AssumptionViolated, DegenerateCritical, NonConvergenceWarning,
                     SpectralAmbiguity)
from .potential import PotentialSpec

__all__ = [
    "TOL_CRIT", "TOL_MORSE", "TOL_FIELD", "TOL_SPEC",
    "CriticalPoint",
    "FieldReport",
    "find_critical_points",
    "classify_saddle_mu",
    "verify_field_conditions",
    "normalize_shift",
    "seed_grid",
]

TOL_CRIT = 1e-10
TOL_MORSE = 1e-8
TOL_FIELD = 1e-8
TOL_SPEC = 1e-9
MERGE_FRACTION = 1e-6


@dataclass
class CriticalPoint:
    id: int
    x: np.ndarray
    u: float
    index: int
    hess_eigvals: np.ndarray
    hess_eigvecs: np.ndarray
    mu: float | None = None
    grad_norm: float = 0.0

    @property
    def kind(self):
        if self.index == 0:
            return "minimum"
        if self.index == 1:
            return "saddle"
        return "higher-index"

    def to_json(self):
        return {
            "id": self.id,
            "x": [float(v) for v in self.x],
            "u": float(self.u),
            "index": int(self.index),
            "kind": self.kind,
            "hess_eigvals": [float(v) for v in self.hess_eigvals],
            "mu": None if self.mu is None else float(self.mu),
        }


@dataclass
class FieldReport:
    max_div: float
    max_orth: float
    n_samples: int
    tol: float = TOL_FIELD
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.max_div <= self.tol and self.max_orth <= self.tol)

    def to_json(self):
        return {"max_div": self.max_div, "max_orth": self.max_orth,
                "n_samples": self.n_samples, "tol": self.tol, "passed": self.passed}


def seed_grid(box, resolution=21, cap=100_000):
    """Regular grid of seeds, ``resolution`` points per axis, at most ``cap`` in total."""
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    n = int(resolution)
    while n ** d > cap and n > 2:
        n -= 1
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _newton(spec, X, max_iter=100, tol=TOL_CRIT):
    """Vectorized Newton on grad U = 0 with eigenvalue-floored Hessian.

    Near-singular directions get |lambda| floored at rho (sign kept), so
    iterates still converge to saddles, not only minima.
    """
    X = np.array(X, dtype=float)
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    width = hi - lo
    max_step = 0.25 * np.linalg.norm(width)
    rho = 1e-6
    active = np.ones(len(X), dtype=bool)
    converged = np.zeros(len(X), dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        x = X[idx]
        g = spec.grad(x)
        gn = np.linalg.norm(g, axis=-1)
        done = gn <= tol
        converged[idx[done]] = True
        active[idx[done]] = False
        idx, x, g = idx[~done], x[~done], g[~done]
        if idx.size == 0:
            break
        w, V = np.linalg.eigh(spec.hess(x))
        w = np.where(np.abs(w) < rho, np.where(w < 0, -rho, rho), w)
        coef = np.einsum("nij,ni->nj", V, g) / w
        step = -np.einsum("nij,nj->ni", V, coef)
        sn = np.linalg.norm(step, axis=-1)
        scale = np.minimum(1.0, max_step / np.maximum(sn, 1e-300))
        x = x + step * scale[:, None]
        X[idx] = x
        outside = np.any((x < lo - 0.5 * width) | (x > hi + 0.5 * width), axis=-1)
        bad = outside | ~np.all(np.isfinite(x), axis=-1)
        active[idx[bad]] = False
    return X, converged


def find_critical_points(spec: PotentialSpec, resolution=21, seeds=None, cap=100_000,
                         tol_merge=None):
    """Locate and classify every critical point of ``spec.U`` inside the box.

    Parameters
    ----------
    spec : PotentialSpec
    resolution : int
        Seeds per axis of the regular grid (capped at ``cap`` points in total).
    seeds : array_like, optional
        Extra user seeds, shape (k, d).

    Returns
    -------
    list of CriticalPoint
        Sorted by coordinates; ``id`` is the position in the list.

    Raises
    ------
    DegenerateCritical
        Some Hessian eigenvalue is within ``TOL_MORSE`` of zero.
    """
    X0 = seed_grid(spec.box, resolution, cap)
    if seeds is not None:
        X0 = np.vstack([X0, np.asarray(seeds, dtype=float).reshape(-1, spec.dim)])
    X, ok = _newton(spec, X0)
    n_bad = int((~ok).sum())
    if n_bad:
        warnings.warn(f"{n_bad} of {len(X0)} Newton seeds did not converge and were dropped",
                      NonConvergenceWarning, stacklevel=2)
    pts = X[ok]
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    pts = pts[np.all((pts >= lo) & (pts <= hi), axis=-1)]
    if tol_merge is None:
        tol_merge = MERGE_FRACTION * spec.diam

    # deterministic dedup: lexicographic sort, then greedy merge
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    reps = []
    for p in pts:
        if not any(np.linalg.norm(p - r) <= tol_merge for r in reps):
            reps.append(p)

    cps = []
    for i, x in enumerate(reps):
        H = spec.hess(x)
        w, V = np.linalg.eigh(H)
        if np.min(np.abs(w)) < TOL_MORSE:
            raise DegenerateCritical(f"degenerate critical point at {x} (eigenvalues {w})", item=x)
        cp = CriticalPoint(id=i, x=np.asarray(x, dtype=float), u=float(spec.U(x)),
                           index=int(np.sum(w < 0)), hess_eigvals=w, hess_eigvecs=V,
                           grad_norm=float(np.linalg.norm(spec.grad(x))))
        if np.linalg.norm(spec.ell(x)) > max(TOL_CRIT, 1e3 * cp.grad_norm + TOL_CRIT):
            raise AssumptionViolated(f"ell does not vanish at critical point {x}", item=i)
        if cp.index == 1:
            cp.mu = classify_saddle_mu(cp, spec)
        cps.append(cp)
    return cps


def classify_saddle_mu(cp: CriticalPoint, spec: PotentialSpec, tol_spec=TOL_SPEC):
    """Return mu_sigma, minus the unique negative eigenvalue of hess U + D ell.

    Raises
    ------
    SpectralAmbiguity
        If the count of eigenvalues with negative real part is not one, the
        negative one is not real, or an eigenvalue sits on the imaginary axis.
    """
    if cp.index != 1:
        raise ValueError("mu is defined for index-1 critical points only")
    M = spec.hess(cp.x) + spec.jac_ell(cp.x)
    ev = np.linalg.eigvals(M)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.any(np.abs(ev.real) <= tol_spec * scale):
        raise SpectralAmbiguity(f"eigenvalue on the imaginary axis at {cp.x}: {ev}", item=cp.id)
    neg = ev[ev.real < 0]
    if len(neg) != 1:
        raise SpectralAmbiguity(f"{len(neg)} eigenvalues with negative real part at {cp.x}", item=cp.id)
    if abs(neg[0].imag) > tol_spec * scale:
        raise SpectralAmbiguity(f"negative eigenvalue is not real at {cp.x}: {neg[0]}", item=cp.id)
    return float(-neg[0].real)


def verify_field_conditions(spec: PotentialSpec, n_samples=4096, seed=0, tol=TOL_FIELD):
    """Max of |div ell| and |grad U . ell| over scrambled-Sobol samples of the box."""
    if spec.ell_poly is None:
        return FieldReport(0.0, 0.0, int(n_samples), tol)
    sampler = qmc.Sobol(d=spec.dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n_samples, 2))))
    u = sampler.random_base2(m)[:n_samples]
    X = qmc.scale(u, spec.box[:, 0], spec.box[:, 1])
    div = np.abs(spec.div_ell(X))
    orth = np.abs(np.sum(spec.grad(X) * spec.ell(X), axis=-1))
    return FieldReport(float(div.max()), float(orth.max()), int(len(X)), tol)


def normalize_shift(spec: PotentialSpec, cps):
    """Shift U so that its lowest minimum sits at height 0; returns (spec, cps)."""
    minima = [c for c in cps if c.index == 0]
    if not minima:
        return spec, cps
    shift = spec.origin_shift + min(c.u for c in minima)
    new = spec.with_shift(shift)
    for c in cps:
        c.u = float(new.U(c.x))
    return new, cps
