"""Finite metric spaces, probability vectors and stochastic kernels.

Distributions are plain 1-D numpy arrays; kernels are numpy arrays whose
trailing axes hold the target distribution.  Everything here validates
eagerly and then treats the arrays as read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOL = 1e-12


class StructureError(ValueError):
    """Input has the wrong shape or refers to mismatched spaces."""


def validate_metric(dist, tol: float = TOL) -> list[str]:
    """Return the list of metric-axiom violations of a distance matrix.

    Each entry names the axiom and the offending indices.  An empty list
    means zero diagonal, symmetry with non-negative entries and the
    triangle inequality all hold up to ``tol``.
    """
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise StructureError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    out: list[str] = []
    for i in range(n):
        if abs(d[i, i]) > tol:
            out.append(f"identity: dist[{i}][{i}] = {d[i, i]!r} != 0")
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] < -tol or d[j, i] < -tol:
                out.append(f"non-negativity: dist[{i}][{j}] < 0")
            if abs(d[i, j] - d[j, i]) > tol:
                out.append(f"symmetry: dist[{i}][{j}] != dist[{j}][{i}]")
    # triangle: d[i,k] <= d[i,j] + d[j,k] for every triple, vectorised over (i,k)
    for j in range(n):
        excess = d - (d[:, j][:, None] + d[j, :][None, :])
        bad = np.argwhere(excess > tol)
        for i, k in bad:
            if i > k and excess[k, i] > tol:
                continue
            out.append(f"triangle: ({i},{j},{k}) dist[{i}][{k}] > dist[{i}][{j}] + dist[{j}][{k}]")
    return out


@dataclass(frozen=True, eq=False)
class MetricSpace:
    """A finite set of labelled points with a distance matrix."""

    labels: tuple
    dist: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        object.__setattr__(self, "labels", tuple(self.labels))
        if d.shape != (len(self.labels), len(self.labels)):
            raise StructureError(
                f"{len(self.labels)} labels but distance matrix of shape {d.shape}"
            )
        problems = validate_metric(d)
        if problems:
            raise StructureError("not a metric: " + "; ".join(problems[:5]))
        off = d + np.eye(len(d))
        if len(d) and off.min() <= TOL:
            raise StructureError("distinct points must be at positive distance")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricSpace):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.dist, other.dist)

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes()))

    @classmethod
    def path(cls, n: int, spacing: float = 1.0, labels: Sequence | None = None) -> "MetricSpace":
        """Points 0..n-1 on a line, ``d(i, j) = spacing * |i - j|``."""
        idx = np.arange(n)
        return cls(labels if labels is not None else tuple(range(n)),
                   spacing * np.abs(idx[:, None] - idx[None, :]))

    @classmethod
    def grid(cls, shape: Sequence[int]) -> "MetricSpace":
        """Integer lattice with the Manhattan metric; labels are coordinate tuples."""
        coords = np.array(list(np.ndindex(*shape)))
        d = np.abs(coords[:, None, :] - coords[None, :, :]).sum(-1)
        return cls(tuple(map(tuple, coords.tolist())), d)

    @classmethod
    def from_points(cls, values: Sequence[float], labels: Sequence | None = None) -> "MetricSpace":
        """Real numbers with the absolute-difference metric."""
        v = np.asarray(values, dtype=float)
        return cls(labels if labels is not None else tuple(v.tolist()),
                   np.abs(v[:, None] - v[None, :]))

    @classmethod
    def discrete(cls, n: int) -> "MetricSpace":
        """The 0/1 metric on ``n`` points."""
        return cls(tuple(range(n)), 1.0 - np.eye(n))

    def restrict(self, indices: Sequence[int]) -> "MetricSpace":
        idx = list(indices)
        return MetricSpace(tuple(self.labels[i] for i in idx), self.dist[np.ix_(idx, idx)])


def check_dist(mass, tol: float = TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    m = np.asarray(mass, dtype=float)
    if m.ndim != 1:
        raise StructureError(f"distribution must be a vector, got shape {m.shape}")
    if np.any(m < -tol):
        raise StructureError(f"negative probability mass {m.min()!r}")
    if abs(m.sum() - 1.0) > tol * max(1, m.size):
        raise StructureError(f"probability mass sums to {m.sum()!r}, not 1")
    return m


def normalize(weights) -> np.ndarray:
    """Scale a non-negative vector so it sums to one."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise StructureError("cannot normalise negative weights")
    total = w.sum()
    if not total > 0:
        raise StructureError("cannot normalise a zero vector")
    return w / total


def support(mass, tol: float = TOL) -> set[int]:
    """Indices carrying more than ``tol`` probability."""
    return {int(i) for i in np.flatnonzero(np.asarray(mass) > tol)}


def point_mass(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def check_kernel(table, n_target_axes: int = 1, tol: float = TOL) -> np.ndarray:
    """Validate that every row (the trailing ``n_target_axes`` axes) is a distribution."""
    k = np.asarray(table, dtype=float)
    if k.ndim < n_target_axes:
        raise StructureError("kernel has fewer axes than its target")
    if np.any(k < -tol):
        raise StructureError("kernel has negative entries")
    axes = tuple(range(k.ndim - n_target_axes, k.ndim))
    sums = k.sum(axis=axes)
    bad = np.argwhere(np.abs(sums - 1.0) > tol * max(1, int(np.prod(k.shape[-n_target_axes:]))))
    if bad.size:
        raise StructureError(f"kernel row {tuple(bad[0])} sums to {sums[tuple(bad[0])]!r}")
    return k


def frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr
