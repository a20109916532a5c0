"""Finite-horizon MDPs: backward induction, policy evaluation, Lipschitz constants.

Time is 0-based in every array: ``c[t]`` is the cost at step ``t + 1`` and
``P[t]`` moves the state from step ``t + 1`` to step ``t + 2``.  Value arrays
have ``T + 1`` rows, the last one being the zero terminal value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spaces import MetricSpace, StructureError, check_kernel, frozen
from .transport import w1


@dataclass(frozen=True, eq=False)
class Mdp:
    """``P`` has shape (T-1, |S|, |A|, |S|); ``c`` has shape (T, |S|, |A|)."""

    space: MetricSpace
    P: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        c = frozen(self.c)
        if c.ndim != 3 or c.shape[1] != len(self.space):
            raise StructureError(f"cost table of shape {c.shape} for {len(self.space)} states")
        T, n, na = c.shape
        if T < 1:
            raise StructureError("horizon must be positive")
        P = np.asarray(self.P, dtype=float)
        if T == 1 and P.size == 0:
            P = P.reshape((0, n, na, n))
        P = frozen(check_kernel(P))
        if P.shape != (T - 1, n, na, n):
            raise StructureError(f"kernel of shape {P.shape}, expected {(T - 1, n, na, n)}")
        if not np.all(np.isfinite(c)):
            raise StructureError("costs must be finite")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "c", c)

    @property
    def T(self) -> int:
        return self.c.shape[0]

    @property
    def n_states(self) -> int:
        return self.c.shape[1]

    @property
    def n_actions(self) -> int:
        return self.c.shape[2]

    @property
    def c_max(self) -> float:
        return float(np.abs(self.c).max())

    def scaled(self, k: float) -> "Mdp":
        return Mdp(self.space, self.P, k * self.c)


def backward_induction(m: Mdp) -> tuple[np.ndarray, np.ndarray]:
    """Optimal Markov policy (T, |S|) and values (T + 1, |S|).

    Ties go to the lowest action index.
    """
    V = np.zeros((m.T + 1, m.n_states))
    pi = np.zeros((m.T, m.n_states), dtype=int)
    for t in range(m.T - 1, -1, -1):
        q = m.c[t].copy()
        if t < m.T - 1:
            q += m.P[t] @ V[t + 1]
        pi[t] = np.argmin(q, axis=1)
        V[t] = q[np.arange(m.n_states), pi[t]]
    return pi, V


def evaluate_markov_policy(m: Mdp, pi) -> np.ndarray:
    """Values (T + 1, |S|) of the deterministic Markov policy ``pi``."""
    pi = np.asarray(pi)
    if pi.shape != (m.T, m.n_states):
        raise StructureError(f"policy of shape {pi.shape}, expected {(m.T, m.n_states)}")
    if not np.issubdtype(pi.dtype, np.integer) or pi.min() < 0 or pi.max() >= m.n_actions:
        raise StructureError("policy must assign a valid action index to every (t, s)")
    idx = np.arange(m.n_states)
    V = np.zeros((m.T + 1, m.n_states))
    for t in range(m.T - 1, -1, -1):
        a = pi[t]
        V[t] = m.c[t, idx, a]
        if t < m.T - 1:
            V[t] += m.P[t, idx, a] @ V[t + 1]
    return V


def lipschitz_of(values, space) -> float:
    """Smallest ``L`` with ``|V(s) - V(s')| <= L d(s, s')`` on the finite space."""
    v = np.asarray(values, dtype=float)
    d = space.dist if isinstance(space, MetricSpace) else np.asarray(space, dtype=float)
    if v.size <= 1:
        return 0.0
    off = ~np.eye(v.size, dtype=bool)
    return float(np.max(np.abs(v[:, None] - v[None, :])[off] / d[off]))


def lipschitz_constants(m: Mdp) -> tuple[np.ndarray, np.ndarray]:
    """Linear moduli of the MDP in its own metric.

    Returns ``(Lc, LP)`` with ``Lc[t]`` the cost Lipschitz constant at step
    ``t + 1`` and ``LP[t]`` the W1-Lipschitz constant of ``P[t]``.
    """
    n = m.n_states
    Lc = np.array([max((lipschitz_of(m.c[t, :, a], m.space) for a in range(m.n_actions)),
                       default=0.0) for t in range(m.T)])
    LP = np.zeros(m.T - 1)
    d = m.space.dist
    for t in range(m.T - 1):
        best = 0.0
        for a in range(m.n_actions):
            rows = m.P[t, :, a]
            for i in range(n):
                for j in range(i + 1, n):
                    best = max(best, w1(rows[i], rows[j], d) / d[i, j])
        LP[t] = best
    return Lc, LP


def recursive_lipschitz_bound(m: Mdp, Lc=None, LP=None) -> np.ndarray:
    """Unrolled ``Lip(V_t) <= Lc_t + LP_t Lip(V_{t+1})``; shape (T + 1,)."""
    if Lc is None or LP is None:
        Lc, LP = lipschitz_constants(m)
    out = np.zeros(m.T + 1)
    for t in range(m.T - 1, -1, -1):
        out[t] = Lc[t] + (LP[t] * out[t + 1] if t < m.T - 1 else 0.0)
    return out
