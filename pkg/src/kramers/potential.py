"""Polynomial potentials U and divergence-free fields ell.

All derivatives are analytic, obtained by differentiating the monomial
representation rather than by finite differences.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import UnknownPotential

__all__ = [
    "Polynomial",
    "PotentialSpec",
    "CATALOG",
    "catalog",
    "parse_ell",
    "load_potential",
    "resolve_potential",
]


class Polynomial:
    """Multivariate polynomial ``sum_k c_k prod_j x_j**e_kj``.

    Parameters
    ----------
    coeffs : array_like, shape (n,)
    exponents : array_like of int, shape (n, d)
    """

    def __init__(self, coeffs, exponents, dim=None):
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        exponents = np.asarray(exponents, dtype=np.int64)
        if exponents.ndim == 1:
            exponents = exponents.reshape(len(coeffs), -1) if len(coeffs) else exponents.reshape(0, dim or 1)
        if dim is None:
            dim = exponents.shape[1]
        if exponents.size == 0:
            exponents = np.zeros((0, dim), dtype=np.int64)
        if exponents.shape != (len(coeffs), dim):
            raise ValueError(f"exponents shape {exponents.shape} does not match ({len(coeffs)}, {dim})")
        if np.any(exponents < 0):
            raise ValueError("negative exponents are not polynomial")
        self.dim = int(dim)
        self.coeffs, self.exponents = _combine(coeffs, exponents, self.dim)

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros(0), np.zeros((0, dim), dtype=np.int64), dim)

    @classmethod
    def from_1d(cls, coefs):
        """Univariate polynomial from ascending coefficients."""
        coefs = np.asarray(coefs, dtype=float)
        return cls(coefs, np.arange(len(coefs)).reshape(-1, 1), 1)

    @property
    def degree(self):
        if len(self.coeffs) == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for c, e in zip(self.coeffs, self.exponents):
            term = np.full(X.shape[0], c)
            for j in range(self.dim):
                if e[j]:
                    term = term * X[:, j] ** e[j]
            out += term
        return out[0] if single else out

    def deriv(self, axis):
        e = self.exponents.copy()
        mask = e[:, axis] > 0
        c = self.coeffs[mask] * e[mask, axis]
        e = e[mask]
        e[:, axis] -= 1
        return Polynomial(c, e, self.dim)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return Polynomial(np.concatenate([self.coeffs, other.coeffs]),
                          np.vstack([self.exponents, other.exponents]), self.dim)

    def __mul__(self, scalar):
        return Polynomial(self.coeffs * float(scalar), self.exponents, self.dim)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def to_json(self):
        return [{"coeff": float(c), "exponents": [int(v) for v in e]}
                for c, e in zip(self.coeffs, self.exponents)]

    @classmethod
    def from_json(cls, items, dim):
        coeffs = [float(it.get("coeff", it.get("coeffs"))) for it in items]
        exps = [list(it["exponents"]) for it in items]
        return cls(coeffs, np.array(exps, dtype=np.int64).reshape(len(coeffs), dim), dim)

    def __repr__(self):
        return f"Polynomial(dim={self.dim}, terms={len(self.coeffs)}, degree={self.degree})"


def _combine(coeffs, exponents, dim):
    # merge like monomials, drop zeros; sorted so equal polynomials compare equal
    acc = {}
    for c, e in zip(coeffs, exponents):
        key = tuple(int(v) for v in e)
        acc[key] = acc.get(key, 0.0) + float(c)
    keys = sorted(k for k, v in acc.items() if v != 0.0)
    if not keys:
        return np.zeros(0), np.zeros((0, dim), dtype=np.int64)
    return np.array([acc[k] for k in keys]), np.array(keys, dtype=np.int64).reshape(len(keys), dim)


@dataclass
class PotentialSpec:
    """Potential/field pair for the drift ``b = -(grad U + ell)``.

    ``ell_poly`` is a list of ``dim`` polynomials (the field components) or
    ``None`` for a reversible diffusion.
    """

    name: str
    dim: int
    poly: Polynomial
    box: np.ndarray
    ell_poly: list | None = None
    ell_mode: str = "none"
    origin_shift: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.box = np.asarray(self.box, dtype=float).reshape(self.dim, 2)
        if self.ell_poly is not None and len(self.ell_poly) != self.dim:
            raise ValueError("ell must have one polynomial per coordinate")

    # polynomial derivatives, built lazily
    def _grad_polys(self):
        if "grad" not in self._cache:
            self._cache["grad"] = [self.poly.deriv(i) for i in range(self.dim)]
        return self._cache["grad"]

    def _hess_polys(self):
        if "hess" not in self._cache:
            g = self._grad_polys()
            self._cache["hess"] = [[g[i].deriv(j) for j in range(self.dim)] for i in range(self.dim)]
        return self._cache["hess"]

    def _jac_ell_polys(self):
        if "jell" not in self._cache:
            self._cache["jell"] = [[p.deriv(j) for j in range(self.dim)] for p in self.ell_poly]
        return self._cache["jell"]

    @property
    def diam(self):
        return float(np.linalg.norm(self.box[:, 1] - self.box[:, 0]))

    @property
    def has_ell(self):
        return self.ell_poly is not None

    def U(self, x):
        return self.poly(x) - self.origin_shift

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([p(x) for p in self._grad_polys()], axis=-1)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        H = self._hess_polys()
        return np.stack([np.stack([H[i][j](x) for j in range(self.dim)], axis=-1)
                         for i in range(self.dim)], axis=-2)

    def ell(self, x):
        x = np.asarray(x, dtype=float)
        if self.ell_poly is None:
            return np.zeros_like(x)
        return np.stack([p(x) for p in self.ell_poly], axis=-1)

    def jac_ell(self, x):
        x = np.asarray(x, dtype=float)
        if self.ell_poly is None:
            shape = x.shape[:-1] + (self.dim, self.dim)
            return np.zeros(shape)
        J = self._jac_ell_polys()
        return np.stack([np.stack([J[i][j](x) for j in range(self.dim)], axis=-1)
                         for i in range(self.dim)], axis=-2)

    def div_ell(self, x):
        x = np.asarray(x, dtype=float)
        if self.ell_poly is None:
            return np.zeros(x.shape[:-1])
        J = self._jac_ell_polys()
        return sum(J[i][i](x) for i in range(self.dim))

    def drift(self, x):
        """``b(x) = -(grad U + ell)(x)``."""
        return -(self.grad(x) + self.ell(x))

    def jac_drift(self, x):
        """``Db(x) = -(hess U + D ell)(x)``."""
        return -(self.hess(x) + self.jac_ell(x))

    def drift_polys(self):
        """Drift components as polynomials, for the compiled integrator."""
        g = self._grad_polys()
        if self.ell_poly is None:
            return [-gi for gi in g]
        return [-(gi + li) for gi, li in zip(g, self.ell_poly)]

    def with_shift(self, shift):
        return PotentialSpec(self.name, self.dim, self.poly, self.box, self.ell_poly,
                             self.ell_mode, float(shift))

    def with_ell(self, ell):
        ell_poly, mode = parse_ell(ell, self)
        return PotentialSpec(self.name, self.dim, self.poly, self.box, ell_poly, mode,
                             self.origin_shift)

    def to_json(self):
        ell = self.ell_mode
        if ell == "monomials":
            ell = [p.to_json() for p in self.ell_poly]
        return {
            "name": self.name,
            "dim": self.dim,
            "monomials": self.poly.to_json(),
            "ell_mode": ell,
            "box": self.box.tolist(),
            "origin_shift": self.origin_shift,
        }


def _rot90_field(poly, c):
    # ell = c * (-d_y U, d_x U): divergence free and orthogonal to grad U
    gx, gy = poly.deriv(0), poly.deriv(1)
    return [gy * (-c), gx * c]


def parse_ell(ell, spec_or_poly):
    """Build field components from an ell description.

    Accepts ``None``/``"none"``, ``"rot90:c"``, ``"rot90_scaled c"`` or a list
    of per-component monomial lists (json form).
    Returns ``(ell_poly, mode_string)``.
    """
    poly = spec_or_poly.poly if isinstance(spec_or_poly, PotentialSpec) else spec_or_poly
    if ell is None:
        return None, "none"
    if isinstance(ell, str):
        s = ell.strip()
        if s in ("", "none", "0"):
            return None, "none"
        for prefix in ("rot90_scaled", "rot90:", "rot90"):
            if s.startswith(prefix):
                c = float(s[len(prefix):].strip(" :=") or 1.0)
                if poly.dim != 2:
                    raise ValueError("rot90 field is defined for dim == 2 only")
                if c == 0.0:
                    return None, "none"
                return _rot90_field(poly, c), f"rot90_scaled {c:g}"
        raise ValueError(f"cannot parse ell specification {ell!r}")
    comps = [Polynomial.from_json(items, poly.dim) for items in ell]
    if len(comps) != poly.dim:
        raise ValueError("ell monomial list needs one entry per coordinate")
    return comps, "monomials"


# -- catalog ---------------------------------------------------------------

def _doublewell1d():
    # (x^2 - 1)^2
    return Polynomial.from_1d([1.0, 0.0, -2.0, 0.0, 1.0]), [[-2.5, 2.5]]


TRIPLEWELL_ROOTS = (-2.0, -1.0, 0.0, 1.2, 2.2)
TRIPLEWELL_SCALE = 0.9


def _triplewell1d_asym():
    # U' = 0.9 (x+2)(x+1) x (x-1.2)(x-2.2); minima -2, 0, 2.2 and saddles -1, 1.2
    dU = TRIPLEWELL_SCALE * npoly.polyfromroots(TRIPLEWELL_ROOTS)
    U = npoly.polyint(dU)
    return Polynomial.from_1d(U), [[-3.0, 3.2]]


def _threewell2d():
    # (x^2+y^2)^2 - (x^3 - 3 x y^2) - (x^2+y^2) + 0.1 x + 0.06 y
    coeffs = [1.0, 2.0, 1.0, -1.0, 3.0, -1.0, -1.0, 0.1, 0.06]
    exps = [[4, 0], [2, 2], [0, 4], [3, 0], [1, 2], [2, 0], [0, 2], [1, 0], [0, 1]]
    return Polynomial(coeffs, exps, 2), [[-2.0, 2.0], [-2.0, 2.0]]


def _doublewell2d():
    # (x^2 - 1)^2 + 1.5 y^2
    coeffs = [1.0, -2.0, 1.0, 1.5]
    exps = [[4, 0], [2, 0], [0, 0], [0, 2]]
    return Polynomial(coeffs, exps, 2), [[-2.5, 2.5], [-2.0, 2.0]]


def _bowl(dim=2):
    exps = np.zeros((dim, dim), dtype=np.int64)
    np.fill_diagonal(exps, 2)
    return Polynomial(np.full(dim, 0.5), exps, dim), [[-2.0, 2.0]] * dim


CATALOG = {
    "doublewell1d": _doublewell1d,
    "triplewell1d_asym": _triplewell1d_asym,
    "threewell2d": _threewell2d,
    "bowl": _bowl,
    "doublewell2d": _doublewell2d,
}


def catalog(name, ell=None, dim=None):
    """Return a catalog potential, optionally with a rotational field.

    >>> catalog("doublewell1d").poly([1.0])
    0.0
    """
    if name not in CATALOG:
        raise UnknownPotential(f"unknown potential {name!r}; catalog: {', '.join(sorted(CATALOG))}")
    if name == "bowl" and dim is not None:
        poly, box = _bowl(int(dim))
    else:
        poly, box = CATALOG[name]()
    ell_poly, mode = parse_ell(ell, poly)
    return PotentialSpec(name, poly.dim, poly, np.array(box, dtype=float), ell_poly, mode)


def load_potential(path_or_dict):
    """Read a potential spec from its json form.

    The field is taken from ``ell`` (or ``ell_mode``): a mode string such as
    ``"rot90:0.5"`` or one monomial list per coordinate.
    """
    if isinstance(path_or_dict, (str, Path)):
        data = json.loads(Path(path_or_dict).read_text())
    else:
        data = dict(path_or_dict)
    dim = int(data["dim"])
    poly = Polynomial.from_json(data["monomials"], dim)
    ell_poly, mode = parse_ell(data.get("ell", data.get("ell_mode", "none")), poly)
    box = np.asarray(data["box"], dtype=float)
    return PotentialSpec(data.get("name", "custom"), dim, poly, box, ell_poly, mode,
                         float(data.get("origin_shift", 0.0)))


def resolve_potential(ref, ell=None, dim=None):
    """Catalog name or path to a json file."""
    p = Path(str(ref))
    if str(ref) not in CATALOG and (p.suffix == ".json" or p.exists()):
        spec = load_potential(p)
        return spec.with_ell(ell) if ell is not None else spec
    return catalog(str(ref), ell=ell, dim=dim)
