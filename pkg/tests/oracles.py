"""Independent reference implementations used only by the tests.

None of these share code with the library: they work from the raw model
tables by brute force or closed forms.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def w1_path(mu, nu, points):
    """W1 on the real line: integral of |F_mu - F_nu|."""
    order = np.argsort(points)
    x = np.asarray(points, dtype=float)[order]
    diff = np.cumsum(np.asarray(mu, float)[order] - np.asarray(nu, float)[order])[:-1]
    return float(np.abs(diff) @ np.diff(x))


def w1_lp(mu, nu, dist):
    """W1 as a dense linear program over couplings."""
    n = len(mu)
    A = []
    for i in range(n):
        row = np.zeros((n, n))
        row[i, :] = 1
        A.append(row.ravel())
    for j in range(n):
        col = np.zeros((n, n))
        col[:, j] = 1
        A.append(col.ravel())
    res = linprog(np.asarray(dist, float).ravel(), A_eq=np.array(A),
                  b_eq=np.concatenate([mu, nu]), bounds=(0, None), method="highs")
    assert res.status == 0
    return float(res.fun)


def markov_policy_values(c, P, policies):
    """Values ``V_1(s)`` of many deterministic Markov policies at once.

    ``policies`` has shape (N, T, S); returns (N, S).
    """
    T, S, _ = c.shape
    N = len(policies)
    V = np.zeros((N, S))
    rows = np.arange(S)
    for t in range(T - 1, -1, -1):
        a = policies[:, t, :]
        stage = c[t][rows[None, :], a]
        if t < T - 1:
            nxt = P[t][rows[None, :], a]            # (N, S, S')
            stage = stage + np.einsum("nsj,nj->ns", nxt, V)
        V = stage
    return V


def brute_force_mdp(c, P):
    """Per-state optimum over every deterministic Markov policy; (V_1, count)."""
    T, S, A = c.shape
    pols = np.array(list(itertools.product(range(A), repeat=T * S)), dtype=int).reshape(-1, T, S)
    V = markov_policy_values(c, P, pols)
    return V.min(axis=0), len(pols)


def open_loop_values(xi_s, P_S, c):
    """Best expected cost over fixed action sequences from the initial law."""
    T, S, A = c.shape
    best = np.inf
    for seq in itertools.product(range(A), repeat=T):
        b = np.asarray(xi_s, float)
        total = 0.0
        for t, a in enumerate(seq):
            total += b @ c[t][:, a]
            if t < T - 1:
                b = b @ P_S[t][:, a]
        best = min(best, total)
    return best


def joint_posterior(xi, P, history):
    """Posterior of S_t by summing the joint law over all state paths."""
    h = tuple(history)
    ys, acts = h[0::2], h[1::2]
    t = len(ys)
    S = xi.shape[0]
    post = np.zeros(S)
    for path in itertools.product(range(S), repeat=t):
        w = xi[path[0], ys[0]]
        for k in range(1, t):
            w *= P[k - 1, path[k - 1], acts[k - 1], path[k], ys[k]]
        post[path[-1]] += w
    z = post.sum()
    return post / z if z > 0 else None


def policy_value_by_paths(xi, P, c, mu):
    """Expected total cost of a history policy by enumerating every (s, y) path."""
    T, S, A = c.shape
    Y = xi.shape[1]
    total = 0.0

    def rec(t, s, hist, prob, acc):
        nonlocal total
        a = mu(hist)
        acc = acc + c[t][s, a]
        if t == T - 1:
            total += prob * acc
            return
        for s2 in range(S):
            for y2 in range(Y):
                q = P[t, s, a, s2, y2]
                if q > 0:
                    rec(t + 1, s2, hist + (a, y2), prob * q, acc)

    for s in range(S):
        for y in range(Y):
            if xi[s, y] > 0:
                rec(0, s, (y,), xi[s, y], 0.0)
    return total


def reachable_by_paths(xi, P, T):
    """Every positive-probability history of every length, by path enumeration."""
    S, Y = xi.shape
    A = P.shape[2] if P.size else 1
    out = {1: set()}
    frontier = []
    for s in range(S):
        for y in range(Y):
            if xi[s, y] > 0:
                out[1].add((y,))
                frontier.append(((y,), s))
    for t in range(1, T):
        out[t + 1] = set()
        nxt = []
        for h, s in frontier:
            for a in range(A):
                for s2 in range(S):
                    for y2 in range(Y):
                        if P[t - 1, s, a, s2, y2] > 0:
                            h2 = h + (a, y2)
                            out[t + 1].add(h2)
                            nxt.append((h2, s2))
        frontier = list(set(nxt))
    return out


def brute_force_pomdp_root(xi, P, c):
    """Root optimum over all deterministic history policies (tiny models only)."""
    T, S, A = c.shape
    reach = reachable_by_paths(xi, P, T)
    hists = sorted(h for t in reach for h in reach[t])
    best = np.inf
    for choice in itertools.product(range(A), repeat=len(hists)):
        table = dict(zip(hists, choice))
        best = min(best, policy_value_by_paths(xi, P, c, table.__getitem__))
    return best
