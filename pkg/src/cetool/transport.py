"""Exact Wasserstein-1 distance between distributions on a finite metric space.

The optimal transport LP is solved with a transportation simplex (the
network simplex specialised to bipartite supply/demand graphs).  Before
solving, the common mass ``min(mu, nu)`` is left in place, which is
optimal for W1 because ``d(x, x) = 0`` and ``d`` obeys the triangle
inequality; only the positive and negative parts of ``mu - nu`` move.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .spaces import MetricSpace, StructureError

_ZERO = 1e-15


def _as_matrix(space) -> np.ndarray:
    return space.dist if isinstance(space, MetricSpace) else np.asarray(space, dtype=float)


def _split(mu, nu, n):
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if mu.shape != (n,) or nu.shape != (n,):
        raise StructureError(
            f"distributions of shapes {mu.shape} and {nu.shape} on a space of size {n}"
        )
    diff = mu - nu
    src = np.flatnonzero(diff > _ZERO)
    dst = np.flatnonzero(diff < -_ZERO)
    return src, diff[src], dst, -diff[dst]


def _northwest(a, b):
    """Initial basic feasible solution with exactly m + k - 1 basic cells."""
    m, k = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    flows = {}
    i = j = 0
    while True:
        f = min(ra[i], rb[j])
        flows[(i, j)] = f
        ra[i] -= f
        rb[j] -= f
        if i == m - 1 and j == k - 1:
            break
        if i == m - 1:
            j += 1
        elif j == k - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return flows


def _potentials(basis, m, k, cost):
    """Solve u_i + v_j = cost_ij on the spanning tree of basic cells."""
    adj_r = [[] for _ in range(m)]
    adj_c = [[] for _ in range(k)]
    for i, j in basis:
        adj_r[i].append(j)
        adj_c[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(k, np.nan)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        side, x = queue.popleft()
        if side == "r":
            for j in adj_r[x]:
                if np.isnan(v[j]):
                    v[j] = cost[x, j] - u[x]
                    queue.append(("c", j))
        else:
            for i in adj_c[x]:
                if np.isnan(u[i]):
                    u[i] = cost[i, x] - v[x]
                    queue.append(("r", i))
    return u, v, adj_r, adj_c


def _tree_path(adj_r, adj_c, i0, j0):
    """Cells on the tree path from row ``i0`` to column ``j0``."""
    parent = {("r", i0): None}
    queue = deque([("r", i0)])
    while queue:
        node = queue.popleft()
        if node == ("c", j0):
            break
        side, x = node
        nbrs = [("c", j) for j in adj_r[x]] if side == "r" else [("r", i) for i in adj_c[x]]
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                queue.append(nb)
    cells = []
    node = ("c", j0)
    while parent[node] is not None:
        prev = parent[node]
        cells.append((prev[1], node[1]) if prev[0] == "r" else (node[1], prev[1]))
        node = prev
    cells.reverse()
    return cells


def transport_simplex(a, b, cost, tol: float = 1e-12, max_iter: int | None = None):
    """Minimise ``sum(x * cost)`` over couplings of supplies ``a`` and demands ``b``.

    Returns ``(value, flows, u, v)`` where ``flows`` maps basic cells to
    amounts and ``(u, v)`` are optimal dual potentials.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, k = len(a), len(b)
    flows = _northwest(a, b)
    scale = max(1.0, float(np.abs(cost).max(initial=0.0)))
    if max_iter is None:
        max_iter = 50 * (m + k) ** 2 + 100
    bland_after = max_iter // 2
    for it in range(max_iter):
        u, v, adj_r, adj_c = _potentials(flows, m, k, cost)
        reduced = cost - u[:, None] - v[None, :]
        if it < bland_after:
            cell = np.unravel_index(np.argmin(reduced), reduced.shape)
            if reduced[cell] >= -tol * scale:
                break
        else:
            # Bland's rule once degeneracy has kept us pivoting for a long time
            cand = np.argwhere(reduced < -tol * scale)
            if not len(cand):
                break
            cell = tuple(cand[0])
        i0, j0 = int(cell[0]), int(cell[1])
        path = _tree_path(adj_r, adj_c, i0, j0)
        # path alternates: first cell loses flow, second gains, ...
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flows[c] for c in minus)
        leave = next(c for c in minus if flows[c] == theta)
        for c in minus:
            flows[c] -= theta
        for c in plus:
            flows[c] += theta
        del flows[leave]
        flows[(i0, j0)] = theta
    else:
        raise RuntimeError("transportation simplex did not converge")
    value = float(sum(f * cost[c] for c, f in flows.items()))
    return value, flows, u, v


def w1(mu, nu, space) -> float:
    """Wasserstein-1 distance between ``mu`` and ``nu`` on ``space``."""
    d = _as_matrix(space)
    src, a, dst, b = _split(mu, nu, d.shape[0])
    if not len(src) or not len(dst):
        return 0.0
    if len(src) == 1:
        return float(b @ d[src[0], dst])
    if len(dst) == 1:
        return float(a @ d[src, dst[0]])
    # guard against round-off in the two masses
    total = min(a.sum(), b.sum())
    a = a * (total / a.sum())
    b = b * (total / b.sum())
    value, *_ = transport_simplex(a, b, d[np.ix_(src, dst)])
    return max(value, 0.0)


def kantorovich_potential(mu, nu, space) -> np.ndarray:
    """A 1-Lipschitz ``f`` with ``sum(f * (mu - nu)) == w1(mu, nu)``.

    Built as the c-transform ``f(x) = min_j d(x, y_j) - v_j`` of the optimal
    demand-side potential, which is 1-Lipschitz on any metric space.
    """
    d = _as_matrix(space)
    n = d.shape[0]
    src, a, dst, b = _split(mu, nu, n)
    if not len(src) or not len(dst):
        return np.zeros(n)
    if len(src) == 1:
        # all supply sits at one point: distance to it is optimal
        return -d[src[0]].copy()
    if len(dst) == 1:
        return d[dst[0]].copy()
    total = min(a.sum(), b.sum())
    a = a * (total / a.sum())
    b = b * (total / b.sum())
    _, _, _, v = transport_simplex(a, b, d[np.ix_(src, dst)])
    return np.min(d[:, dst] - v[None, :], axis=1)


def w1_convexity_residual(components, space) -> float:
    """``sum_k w_k W1(mu_k, nu_k) - W1(sum_k w_k mu_k, sum_k w_k nu_k)``; never below zero."""
    weights = np.array([w for w, _, _ in components], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise StructureError("mixture weights must form a distribution")
    mus = np.array([np.asarray(m, dtype=float) for _, m, _ in components])
    nus = np.array([np.asarray(v, dtype=float) for _, _, v in components])
    mixed = w1(weights @ mus, weights @ nus, space)
    return float(sum(w * w1(m, v, space) for w, m, v in zip(weights, mus, nus)) - mixed)

