"""Reduced Markov chain on the local minima: weights, generator, semigroup, resolvent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .errors import NegativeDet, SingularSystem
from .heights import TOL_GATE, LandscapeGraph

__all__ = [
    "ReducedChain",
    "ChainStructure",
    "nu_weight",
    "saddle_weight",
    "assemble_chain",
    "generator_from_weights",
    "semigroup",
    "solve_resolvent",
    "resolvent_by_quadrature",
    "long_time_structure",
]


@dataclass
class ReducedChain:
    states: list
    nu: np.ndarray
    omega1: np.ndarray
    L: np.ndarray
    d1: float
    saddle_omega: dict

    def theta1(self, eps):
        return float(np.exp(self.d1 / eps))

    def index(self, mid):
        return self.states.index(mid)

    def mean_holding_time(self, mid):
        """Expected time in ``mid`` before the first jump, in theta1 units."""
        rate = -self.L[self.index(mid), self.index(mid)]
        return np.inf if rate == 0 else 1.0 / rate

    def to_json(self):
        return {
            "states": list(self.states),
            "nu": self.nu.tolist(),
            "omega1": self.omega1.tolist(),
            "L": self.L.tolist(),
            "d1": float(self.d1),
            "saddle_omega": {str(k): float(v) for k, v in sorted(self.saddle_omega.items())},
        }

    @classmethod
    def from_json(cls, data):
        return cls(list(data["states"]), np.array(data["nu"]), np.array(data["omega1"]),
                   np.array(data["L"]), float(data["d1"]),
                   {int(k): v for k, v in data.get("saddle_omega", {}).items()})


@dataclass
class ChainStructure:
    classes: list
    pis: list
    absorption: np.ndarray
    transient: list

    def limit_matrix(self, n):
        """sum_k absorption(m, k) pi_k(m'), an n x n stochastic matrix."""
        P = np.zeros((n, n))
        for k, pi in enumerate(self.pis):
            P += np.outer(self.absorption[:, k], pi)
        return P

    def to_json(self, states=None):
        label = (lambda i: states[i]) if states is not None else (lambda i: i)
        return {
            "classes": [[label(i) for i in c] for c in self.classes],
            "pis": [pi.tolist() for pi in self.pis],
            "absorption": self.absorption.tolist(),
            "transient": [label(i) for i in self.transient],
        }


def nu_weight(hess):
    return 1.0 / np.sqrt(np.linalg.det(hess))


def saddle_weight(mu, hess):
    """Eyring-Kramers prefactor mu / (2 pi sqrt(-det hess))."""
    det = np.linalg.det(hess)
    if det >= 0:
        raise NegativeDet(f"det hess = {det:g} >= 0 at a claimed saddle")
    return mu / (2.0 * np.pi * np.sqrt(-det))


def generator_from_weights(nu, omega1):
    L = omega1 / np.asarray(nu)[:, None]
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def assemble_chain(graph: LandscapeGraph, tol_gate=TOL_GATE):
    """Generator L_1 = omega_1 / nu on the minima of ``graph``."""
    spec = graph.spec
    states = graph.minima_ids
    n = len(states)
    nu = np.array([nu_weight(spec.hess(m.x)) for m in graph.minima])
    sw = {}
    for s in graph.saddles:
        if any(s.id in v for v in graph.S.values()):
            sw[s.id] = saddle_weight(s.mu, spec.hess(s.x))
    omega1 = np.zeros((n, n))
    for (m, mp), sids in graph.S.items():
        i, j = states.index(m), states.index(mp)
        if abs(graph.gamma[i] - graph.d1) <= tol_gate:
            omega1[i, j] = sum(sw[s] for s in sids)
    L = generator_from_weights(nu, omega1)
    return ReducedChain(states, nu, omega1, L, float(graph.d1), sw)


def semigroup(chain_or_L, t, return_violation=False):
    """p_t = exp(t L) (scaling and squaring, Pade 13); negatives clamped to zero."""
    L = chain_or_L.L if isinstance(chain_or_L, ReducedChain) else np.asarray(chain_or_L)
    if t < 0:
        raise ValueError("t must be nonnegative")
    P = linalg.expm(t * L)
    violation = float(max(0.0, -P.min()))
    P = np.maximum(P, 0.0)
    return (P, violation) if return_violation else P


def solve_resolvent(chain_or_L, lam, g):
    """Solve (lam - L) f = g."""
    L = chain_or_L.L if isinstance(chain_or_L, ReducedChain) else np.asarray(chain_or_L)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    g = np.asarray(g, dtype=float)
    M = lam * np.eye(len(L)) - L
    try:
        f = np.linalg.solve(M, g)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    res = np.max(np.abs(M @ f - g)) if g.size else 0.0
    if res > 1e-10 * max(np.max(np.abs(g)), 1e-300):
        raise SingularSystem(f"resolvent residual {res:g} too large")
    return f


def resolvent_by_quadrature(chain_or_L, lam, g):
    """int_0^inf exp(-lam t) exp(tL) g dt by adaptive vector quadrature."""
    from scipy.integrate import quad_vec

    L = chain_or_L.L if isinstance(chain_or_L, ReducedChain) else np.asarray(chain_or_L)
    g = np.asarray(g, dtype=float)
    f, _ = quad_vec(lambda t: np.exp(-lam * t) * (linalg.expm(t * L) @ g), 0.0, np.inf,
                    epsabs=1e-13, epsrel=1e-12)
    return f


def _stationary(Lc):
    # pi^T Lc = 0, sum pi = 1: least squares on the stacked system
    n = len(Lc)
    A = np.vstack([Lc.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def long_time_structure(chain_or_L):
    """Closed classes with their stationary laws, and absorption into each class."""
    L = chain_or_L.L if isinstance(chain_or_L, ReducedChain) else np.asarray(chain_or_L)
    n = len(L)
    adj = (L > 0).astype(int)
    np.fill_diagonal(adj, 0)
    ncomp, lab = connected_components(adj, directed=True, connection="strong")
    comps = [sorted(np.flatnonzero(lab == c).tolist()) for c in range(ncomp)]
    closed = []
    for c in comps:
        cs = set(c)
        if not any(adj[i, j] for i in c for j in range(n) if j not in cs):
            closed.append(c)
    closed.sort(key=lambda c: c[0])
    in_class = set().union(*map(set, closed)) if closed else set()
    transient = [i for i in range(n) if i not in in_class]

    pis = []
    for c in closed:
        pi = np.zeros(n)
        pi[c] = _stationary(L[np.ix_(c, c)])
        pis.append(pi)

    A = np.zeros((n, len(closed)))
    for k, c in enumerate(closed):
        A[c, k] = 1.0
    if transient:
        T = transient
        LTT = L[np.ix_(T, T)]
        for k, c in enumerate(closed):
            rhs = -L[np.ix_(T, c)].sum(axis=1)
            A[T, k] = np.linalg.solve(LTT, rhs)
    return ChainStructure(closed, pis, A, transient)
