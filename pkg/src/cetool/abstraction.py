"""State abstraction: the map phi, lifting kernels, and the abstract MDP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import Mdp
from .spaces import MetricSpace, StructureError, check_kernel, frozen


@dataclass(frozen=True, eq=False)
class Abstraction:
    """``phi[s]`` is the abstract index of ``s``; ``lambda_p``/``lambda_c`` are (|S~|, |S|)."""

    source: MetricSpace
    target: MetricSpace
    phi: np.ndarray
    lambda_p: np.ndarray
    lambda_c: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=int)
        n, k = len(self.source), len(self.target)
        if phi.shape != (n,) or phi.min(initial=0) < 0 or phi.max(initial=0) >= k:
            raise StructureError("phi must map every source state to a target index")
        if set(phi.tolist()) != set(range(k)):
            raise StructureError("phi must be onto: every abstract state needs a non-empty fiber")
        phi = phi.copy()
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        fibers = self.fiber_matrix()
        for name in ("lambda_p", "lambda_c"):
            lam = frozen(check_kernel(getattr(self, name)))
            if lam.shape != (k, n):
                raise StructureError(f"{name} has shape {lam.shape}, expected {(k, n)}")
            off = np.abs(lam * (1 - fibers)).sum(axis=1)
            if np.any(off > 1e-12):
                raise StructureError(
                    f"{name} puts mass {off.max():.3g} outside the fiber of abstract state "
                    f"{int(np.argmax(off))}")
            object.__setattr__(self, name, lam)

    def fiber_matrix(self) -> np.ndarray:
        """Indicator (|S~|, |S|) of ``phi(s) == s~``."""
        k = len(self.target)
        return (self.phi[None, :] == np.arange(k)[:, None]).astype(float)

    def fiber(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.phi == k)

    @property
    def phi_dist(self) -> np.ndarray:
        """``d~(phi(s), phi(s'))`` as an (|S|, |S|) matrix."""
        return self.target.dist[np.ix_(self.phi, self.phi)]

    @property
    def is_identity(self) -> bool:
        return len(self.source) == len(self.target) and np.array_equal(
            self.phi, np.arange(len(self.source)))

    @classmethod
    def identity(cls, space: MetricSpace) -> "Abstraction":
        eye = np.eye(len(space))
        return cls(space, space, np.arange(len(space)), eye, eye)

    @classmethod
    def from_partition(cls, source: MetricSpace, phi: Sequence[int], representatives: Sequence[int],
                       lifting: str = "dirac", target: MetricSpace | None = None) -> "Abstraction":
        """Cells given by ``phi`` with designated representatives.

        ``lifting`` is ``"dirac"`` (all lifting mass on the representative) or
        ``"uniform"`` (uniform over the cell).  Unless given, the target metric
        is the source metric restricted to the representatives.
        """
        phi = np.asarray(phi, dtype=int)
        reps = [int(r) for r in representatives]
        k = len(reps)
        for j, r in enumerate(reps):
            if phi[r] != j:
                raise StructureError(f"representative {r} does not lie in cell {j}")
        if target is None:
            target = source.restrict(reps)
        if lifting == "dirac":
            lam = np.zeros((k, len(source)))
            lam[np.arange(k), reps] = 1.0
        elif lifting == "uniform":
            lam = (phi[None, :] == np.arange(k)[:, None]).astype(float)
            lam /= lam.sum(axis=1, keepdims=True)
        else:
            raise ValueError(f"unknown lifting {lifting!r}")
        return cls(source, target, phi, lam, lam)

    def cell_radius(self) -> float:
        """Largest ``d_S(s, r)`` from a state to the lifting support of its cell.

        For Dirac lifting this is the usual quantisation radius.
        """
        d = self.source.dist
        out = 0.0
        for k in range(len(self.target)):
            reps = np.flatnonzero(self.lambda_c[k] > 0)
            for s in self.fiber(k):
                out = max(out, float(d[s, reps].max()))
        return out


def pushforward_kernel(m: Mdp, ab: Abstraction, t: int, s: int, a: int) -> np.ndarray:
    """Law of ``phi(S_{t+1})`` given ``(s, a)`` at 0-based step ``t``."""
    return ab.fiber_matrix() @ m.P[t, s, a]


def pushforward_all(m: Mdp, ab: Abstraction) -> np.ndarray:
    """Every pushforward row at once; shape (T-1, |S|, |A|, |S~|)."""
    return m.P @ ab.fiber_matrix().T


def build_abstract_mdp(m: Mdp, ab: Abstraction) -> Mdp:
    """Average costs with ``lambda_c`` and pushed-forward dynamics with ``lambda_p``."""
    if len(ab.source) != m.n_states:
        raise StructureError("abstraction source does not match the MDP state space")
    if ab.is_identity and np.array_equal(ab.lambda_p, np.eye(m.n_states)) \
            and np.array_equal(ab.lambda_c, np.eye(m.n_states)):
        return Mdp(ab.target, m.P, m.c)
    c = np.einsum("ks,tsa->tka", ab.lambda_c, m.c)
    P = np.einsum("ks,tsaj->tkaj", ab.lambda_p, pushforward_all(m, ab))
    return Mdp(ab.target, P, c)
