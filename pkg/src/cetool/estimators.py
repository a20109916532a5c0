"""Abstract-state estimators: maps from histories to abstract state indices.

An estimator is called as ``g(history, belief=None)``.  Rules that need
the posterior use the belief supplied by the history tree when there is
one and fall back to running the Bayes filter otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .abstraction import Abstraction
from .pomdp import HistoryTree, Pomdp, StructureError, filter as bayes_filter, history_key


@dataclass(frozen=True, eq=False)
class Estimator:
    name: str
    rule: Callable
    pomdp: Pomdp | None = field(default=None, repr=False)
    needs_belief: bool = False

    def __call__(self, history, belief=None) -> int:
        h = tuple(history)
        if self.needs_belief and belief is None:
            if self.pomdp is None:
                raise StructureError(f"estimator {self.name!r} needs a belief or a model")
            belief = bayes_filter(self.pomdp, h)
        return int(self.rule(h, belief))


def last_observation(obs_to_abstract: Sequence[int], name: str = "last-observation") -> Estimator:
    """``g(h_t) = obs_to_abstract[y_t]``."""
    table = np.asarray(obs_to_abstract, dtype=int)
    return Estimator(name, lambda h, b: table[h[-1]])


def quantized_last_observation(ab: Abstraction, obs_to_state: Sequence[int]) -> Estimator:
    """``g(h_t) = phi(y_t)`` when observations live in the state space."""
    return last_observation(ab.phi[np.asarray(obs_to_state, dtype=int)],
                            name="quantized-last-observation")


def map_posterior(p: Pomdp, ab: Abstraction) -> Estimator:
    """Most probable abstract state under the posterior; ties to the lowest index."""
    fib = ab.fiber_matrix()
    return Estimator("map-posterior", lambda h, b: np.argmax(fib @ b), p, needs_belief=True)


def posterior_mean_representative(p: Pomdp, ab: Abstraction) -> Estimator:
    """Abstract state minimising the posterior expected distance to ``phi(S_t)``.

    On a finite metric space this is the point estimate that plays the role
    of the posterior mean; it is also the minimiser of the per-history
    estimation error.
    """
    D = ab.target.dist[ab.phi]  # (|S|, |S~|)
    return Estimator("posterior-mean-representative",
                     lambda h, b: np.argmin(b @ D), p, needs_belief=True)


def recursive(init: Callable, update: Callable, name: str = "recursive",
              output: Callable | None = None) -> Estimator:
    """Estimator driven by a recursion ``z_1 = init(y_1)``, ``z_t = update(z_{t-1}, a_{t-1}, y_t)``."""
    out = output or (lambda z: z)

    def rule(h, b):
        z = init(h[0])
        for k in range(1, len(h), 2):
            z = update(z, h[k], h[k + 1])
        return out(z)

    return Estimator(name, rule)


def from_table(table: Mapping, name: str = "table") -> Estimator:
    """Explicit estimator over histories (keys are tuples or ``"y1,a1,y2"`` strings)."""
    norm = {}
    for k, v in table.items():
        key = tuple(int(x) for x in k.split(",")) if isinstance(k, str) else tuple(k)
        norm[key] = int(v)

    def rule(h, b):
        try:
            return norm[h]
        except KeyError:
            raise StructureError(f"estimator {name!r} undefined on history {h}") from None

    return Estimator(name, rule)


def hashed(seed: int, n_abstract: int) -> Estimator:
    """Deterministic pseudo-random estimator: a fixed arbitrary function of the history."""

    def rule(h, b):
        return np.random.default_rng([seed, *h]).integers(n_abstract)

    return Estimator(f"hashed-{seed}", rule)


def materialize(g: Estimator, tree: HistoryTree) -> dict:
    """Tabulate ``g`` on every reachable history, keyed by ``"y1,a1,y2"`` strings."""
    out = {}
    for lv in tree.levels:
        for i, h in enumerate(lv.histories):
            out[history_key(h)] = g(h, lv.beliefs[i])
    return out
