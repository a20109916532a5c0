"""Finite-horizon POMDPs and the exhaustive history-tree oracle.

A history is a flat tuple ``(y1, a1, y2, a2, ..., yt)`` of indices, so its
length is ``2t - 1``.  The tree enumerates every history that has positive
probability under the action sequence it contains; beliefs are computed by
exact Bayes updates and do not depend on any policy.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .mdp import Mdp
from .spaces import MetricSpace, StructureError, check_kernel, frozen

DEFAULT_BUDGET = 200_000


class UnreachableHistory(ValueError):
    """The history has zero probability, so its belief is undefined."""


class BudgetExceeded(RuntimeError):
    """The history tree does not fit into the enumeration budget."""

    def __init__(self, needed: int, budget: int, worst_case: int | None = None):
        self.needed = needed
        self.budget = budget
        msg = f"history tree needs at least {needed} nodes, budget is {budget}"
        if worst_case is not None:
            msg += f" (worst case {worst_case})"
        super().__init__(msg)


def budget_from_env(default: int = DEFAULT_BUDGET) -> int:
    raw = os.environ.get("CETOOL_BUDGET")
    return int(raw) if raw else default


def horizon_of(history) -> int:
    return (len(history) + 1) // 2


def observations_of(history) -> tuple:
    return tuple(history[0::2])


def actions_of(history) -> tuple:
    return tuple(history[1::2])


def history_key(history) -> str:
    return ",".join(map(str, history))


def parse_history(key: str) -> tuple:
    return tuple(int(x) for x in key.split(",")) if key else ()


@dataclass(frozen=True, eq=False)
class Pomdp:
    """``xi`` is (|S|, |Y|); ``P`` is (T-1, |S|, |A|, |S|, |Y|); ``c`` is (T, |S|, |A|)."""

    space: MetricSpace
    xi: np.ndarray
    P: np.ndarray
    c: np.ndarray
    obs_labels: tuple = ()
    action_labels: tuple = ()

    def __post_init__(self):
        c = frozen(self.c)
        if c.ndim != 3 or c.shape[1] != len(self.space):
            raise StructureError(f"cost table of shape {c.shape} for {len(self.space)} states")
        T, n, na = c.shape
        xi = frozen(self.xi)
        if xi.ndim != 2 or xi.shape[0] != n:
            raise StructureError(f"initial law of shape {xi.shape}")
        ny = xi.shape[1]
        check_kernel(xi.ravel())
        P = np.asarray(self.P, dtype=float)
        if T == 1 and P.size == 0:
            P = P.reshape((0, n, na, n, ny))
        if P.shape != (T - 1, n, na, n, ny):
            raise StructureError(f"kernel of shape {P.shape}, expected {(T - 1, n, na, n, ny)}")
        P = frozen(check_kernel(P, n_target_axes=2))
        if not np.all(np.isfinite(c)):
            raise StructureError("costs must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "obs_labels", tuple(self.obs_labels) or tuple(range(ny)))
        object.__setattr__(self, "action_labels", tuple(self.action_labels) or tuple(range(na)))
        if len(self.obs_labels) != ny or len(self.action_labels) != na:
            raise StructureError("label count does not match the model")

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
    def n_obs(self) -> int:
        return self.xi.shape[1]

    @property
    def c_max(self) -> float:
        return float(np.abs(self.c).max())

    @property
    def P_S(self) -> np.ndarray:
        return self.P.sum(axis=-1)

    @property
    def P_Y(self) -> np.ndarray:
        return self.P.sum(axis=-2)

    def mdp(self) -> Mdp:
        """The fully observed MDP on the same state space."""
        return Mdp(self.space, self.P_S, self.c)

    def scaled(self, k: float) -> "Pomdp":
        return Pomdp(self.space, self.xi, self.P, k * self.c, self.obs_labels, self.action_labels)

    def worst_case_nodes(self) -> int:
        ny, na = self.n_obs, self.n_actions
        return sum(ny ** t * na ** (t - 1) for t in range(1, self.T + 1))


def fully_observed(p: Pomdp) -> Pomdp:
    """Same dynamics and costs with ``Y_t = S_t``."""
    n = p.n_states
    eye = np.eye(n)
    xi = p.xi.sum(axis=1)[:, None] * eye
    P = p.P_S[..., None] * eye[None, None, None, :, :]
    return Pomdp(p.space, xi, P, p.c, p.space.labels, p.action_labels)


def uninformative(p: Pomdp) -> Pomdp:
    """Same dynamics and costs with a single, constant observation."""
    return Pomdp(p.space, p.xi.sum(axis=1, keepdims=True), p.P_S[..., None], p.c,
                 ("-",), p.action_labels)


def filter(p: Pomdp, history) -> np.ndarray:  # noqa: A001 - the Bayes filter
    """Posterior over the current state given ``history``."""
    h = tuple(int(x) for x in history)
    if len(h) % 2 != 1:
        raise StructureError("history must have the form (y1, a1, ..., yt)")
    t = horizon_of(h)
    if t > p.T:
        raise StructureError(f"history of length {t} exceeds horizon {p.T}")
    joint = p.xi[:, h[0]]
    for k in range(1, t):
        if joint.sum() <= 0:
            break
        b = joint / joint.sum()
        a, y = h[2 * k - 1], h[2 * k]
        joint = b @ p.P[k - 1, :, a, :, y]
    z = joint.sum()
    if not z > 0:
        raise UnreachableHistory(f"history {h} has zero probability")
    return joint / z


@dataclass
class BeliefNode:
    history: tuple
    belief: np.ndarray
    prob: float  # Pr(y_{1:t} | a_{1:t-1})

    @property
    def t(self) -> int:
        return horizon_of(self.history)


@dataclass
class _Level:
    beliefs: np.ndarray          # (N, |S|)
    histories: list              # N history tuples
    parent: np.ndarray           # (N,) index into previous level, -1 at t = 1
    action: np.ndarray           # (N,) action leading here, -1 at t = 1
    cond: np.ndarray             # (N,) Pr(y_t | h_{t-1}, a_{t-1})
    prob: np.ndarray             # (N,) reach probability


@dataclass
class HistoryTree:
    """Breadth-first materialisation of all positive-probability histories."""

    pomdp: Pomdp
    levels: list = field(default_factory=list)
    _index: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, p: Pomdp, depth: int | None = None, budget: int | None = None) -> "HistoryTree":
        depth = p.T if depth is None else depth
        budget = budget_from_env() if budget is None else budget
        tree = cls(p)
        py = p.xi.sum(axis=0)
        ys = np.flatnonzero(py > 0)
        total = len(ys)
        if total > budget:
            raise BudgetExceeded(total, budget, p.worst_case_nodes())
        tree.levels.append(_Level(
            beliefs=(p.xi[:, ys] / py[ys]).T.copy(),
            histories=[(int(y),) for y in ys],
            parent=np.full(len(ys), -1), action=np.full(len(ys), -1),
            cond=py[ys].copy(), prob=py[ys].copy(),
        ))
        for t in range(1, depth):
            prev = tree.levels[-1]
            # joint over (node, action, next state, next obs)
            Q = np.einsum("ks,sazy->kazy", prev.beliefs, p.P[t - 1])
            obs = Q.sum(axis=2)
            k, a, y = np.nonzero(obs > 0)
            total += len(k)
            if total > budget:
                raise BudgetExceeded(total, budget, p.worst_case_nodes())
            cond = obs[k, a, y]
            beliefs = Q[k, a, :, y] / cond[:, None]
            hist = prev.histories
            tree.levels.append(_Level(
                beliefs=beliefs,
                histories=[hist[i] + (int(ai), int(yi)) for i, ai, yi in zip(k, a, y)],
                parent=k, action=a, cond=cond, prob=prev.prob[k] * cond,
            ))
        return tree

    @property
    def depth(self) -> int:
        return len(self.levels)

    def __len__(self) -> int:
        return sum(len(lv.histories) for lv in self.levels)

    def nodes(self, t: int) -> list[BeliefNode]:
        lv = self.levels[t - 1]
        return [BeliefNode(h, lv.beliefs[i], float(lv.prob[i])) for i, h in enumerate(lv.histories)]

    def locate(self, history) -> tuple[int, int]:
        if not self._index:
            for t, lv in enumerate(self.levels, start=1):
                for i, h in enumerate(lv.histories):
                    self._index[h] = (t, i)
        try:
            return self._index[tuple(history)]
        except KeyError:
            raise UnreachableHistory(f"history {tuple(history)} is not in the reachable tree") from None

    def belief(self, history) -> np.ndarray:
        t, i = self.locate(history)
        return self.levels[t - 1].beliefs[i]

    def expected_costs(self, t: int) -> np.ndarray:
        """``E[c_t(S_t, a) | h_t]`` for every node at step ``t``; shape (N, |A|)."""
        return self.levels[t - 1].beliefs @ self.pomdp.c[t - 1]

    def _continuation(self, t: int, W_next: np.ndarray) -> np.ndarray:
        n = len(self.levels[t - 1].histories)
        cont = np.zeros((n, self.pomdp.n_actions))
        if t < self.depth:
            nxt = self.levels[t]
            np.add.at(cont, (nxt.parent, nxt.action), nxt.cond * W_next)
        return cont

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "nodes": [
                {"history": history_key(h), "t": t, "prob": float(lv.prob[i]),
                 "belief": lv.beliefs[i].tolist()}
                for t, lv in enumerate(self.levels, start=1)
                for i, h in enumerate(lv.histories)
            ],
        }

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def reachable_histories(p: Pomdp, t: int, budget: int | None = None) -> list[BeliefNode]:
    """All positive-probability histories of length ``t`` with their beliefs."""
    if not 1 <= t <= p.T:
        raise StructureError(f"t = {t} outside 1..{p.T}")
    return HistoryTree.build(p, depth=t, budget=budget).nodes(t)


@dataclass
class TreeValues:
    """Values on every reachable history, level by level (``values[t - 1]``)."""

    tree: HistoryTree
    values: list
    actions: list

    def __call__(self, history) -> float:
        t, i = self.tree.locate(history)
        return float(self.values[t - 1][i])

    def policy(self) -> Callable:
        table = {h: int(a) for lv, acts in zip(self.tree.levels, self.actions)
                 for h, a in zip(lv.histories, acts)}
        return TablePolicy(table)

    def root_values(self) -> np.ndarray:
        return self.values[0]


@dataclass
class TablePolicy:
    """History policy backed by an explicit table over the reachable tree."""

    table: Mapping

    def __call__(self, history, belief=None) -> int:
        try:
            return self.table[tuple(history)]
        except KeyError:
            raise StructureError(f"policy undefined on history {tuple(history)}") from None


def optimal_value(p: Pomdp, tree: HistoryTree | None = None, budget: int | None = None) -> TreeValues:
    """``W^P_t(h)`` on every reachable history, by backward recursion on the tree."""
    tree = tree or HistoryTree.build(p, budget=budget)
    values: list = [None] * p.T
    acts: list = [None] * p.T
    W_next = None
    for t in range(p.T, 0, -1):
        q = tree.expected_costs(t) + tree._continuation(t, W_next)
        acts[t - 1] = np.argmin(q, axis=1)
        values[t - 1] = q[np.arange(len(q)), acts[t - 1]]
        W_next = values[t - 1]
    return TreeValues(tree, values, acts)


def evaluate_history_policy(p: Pomdp, mu: Callable, tree: HistoryTree | None = None,
                            budget: int | None = None) -> TreeValues:
    """Exact ``W^{P,mu}_t(h)`` on every reachable history.

    ``mu`` is called as ``mu(history, belief)`` and must return an action index.
    """
    tree = tree or HistoryTree.build(p, budget=budget)
    values: list = [None] * p.T
    acts: list = [None] * p.T
    W_next = None
    for t in range(p.T, 0, -1):
        lv = tree.levels[t - 1]
        chosen = np.empty(len(lv.histories), dtype=int)
        for i, h in enumerate(lv.histories):
            a = mu(h, lv.beliefs[i])
            if not (isinstance(a, (int, np.integer)) and 0 <= a < p.n_actions):
                raise StructureError(f"policy returned {a!r} on history {h}")
            chosen[i] = a
        q = tree.expected_costs(t) + tree._continuation(t, W_next)
        values[t - 1] = q[np.arange(len(q)), chosen]
        acts[t - 1] = chosen
        W_next = values[t - 1]
    return TreeValues(tree, values, acts)


def simulate(p: Pomdp, mu: Callable, n: int, rng: np.random.Generator):
    """Sample ``n`` trajectories under the history policy ``mu``.

    Returns ``(states, observations, actions, total_cost)`` with the first
    three of shape (n, T).
    """
    T, ns, ny = p.T, p.n_states, p.n_obs
    states = np.zeros((n, T), dtype=int)
    obs = np.zeros((n, T), dtype=int)
    acts = np.zeros((n, T), dtype=int)
    total = np.zeros(n)

    def draw(rows):
        u = rng.random(len(rows))
        idx = (np.cumsum(rows, axis=1) < u[:, None]).sum(axis=1)
        return np.minimum(idx, rows.shape[1] - 1)

    flat = draw(np.broadcast_to(p.xi.ravel(), (n, ns * ny)))
    states[:, 0], obs[:, 0] = np.divmod(flat, ny)
    hist = [(int(y),) for y in obs[:, 0]]
    for t in range(T):
        acts[:, t] = [mu(h) for h in hist]
        total += p.c[t, states[:, t], acts[:, t]]
        if t == T - 1:
            break
        flat = draw(p.P[t, states[:, t], acts[:, t]].reshape(n, ns * ny))
        states[:, t + 1], obs[:, t + 1] = np.divmod(flat, ny)
        hist = [h + (int(a), int(y)) for h, a, y in zip(hist, acts[:, t], obs[:, t + 1])]
    return states, obs, acts, total
