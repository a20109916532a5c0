"""Concave non-decreasing moduli and their fitting from model data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstraction import Abstraction, pushforward_all
from .mdp import Mdp
from .transport import w1

_TOL = 1e-12


class ModulusError(AssertionError):
    """A fitted modulus fails to dominate the data it was fitted to."""


@dataclass(frozen=True)
class Modulus:
    """Piecewise-linear ``F`` through ``(xs[i], ys[i])`` and slope ``tail`` after the last point."""

    xs: tuple = (0.0,)
    ys: tuple = (0.0,)
    tail: float = 0.0

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        ys = tuple(float(y) for y in self.ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "tail", float(self.tail))
        if len(xs) != len(ys) or not xs or xs[0] != 0.0:
            raise ValueError("breakpoints must start at x = 0")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if ys[0] < -_TOL:
            raise ValueError("modulus must be non-negative")
        slopes = self.slopes()
        if any(s < -_TOL for s in slopes):
            raise ValueError("modulus must be non-decreasing")
        if any(b > a + _TOL * max(1.0, abs(a)) for a, b in zip(slopes, slopes[1:])):
            raise ValueError("modulus must be concave")

    @classmethod
    def linear(cls, slope: float, offset: float = 0.0) -> "Modulus":
        return cls((0.0,), (offset,), slope)

    @classmethod
    def zero(cls) -> "Modulus":
        return cls()

    def slopes(self) -> list[float]:
        xs, ys = self.xs, self.ys
        return [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)] + [self.tail]

    @property
    def offset(self) -> float:
        return self.ys[0]

    @property
    def is_linear(self) -> bool:
        return len(self.xs) == 1 and self.ys[0] == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise ValueError("modulus evaluated at a negative distance")
        inside = np.interp(x, self.xs, self.ys)
        out = np.where(x > self.xs[-1], self.ys[-1] + self.tail * (x - self.xs[-1]), inside)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"xs": list(self.xs), "ys": list(self.ys), "tail": self.tail}

    @classmethod
    def from_dict(cls, d: dict) -> "Modulus":
        return cls(tuple(d["xs"]), tuple(d["ys"]), d.get("tail", 0.0))


def cost_scatter(m: Mdp, ab: Abstraction) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per step, ``(d~(phi s, phi s'), max_a |c(s,a) - c(s',a)|)`` over pairs ``s < s'``."""
    iu = np.triu_indices(m.n_states, k=1)
    x = ab.phi_dist[iu]
    out = []
    for t in range(m.T):
        c = m.c[t]
        gap = np.abs(c[:, None, :] - c[None, :, :]).max(axis=2)[iu]
        out.append((x, gap))
    return out


def kernel_scatter(m: Mdp, ab: Abstraction) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per step, ``(d~(phi s, phi s'), max_a W1(P^phi(s,a), P^phi(s',a)))`` over pairs."""
    iu = np.triu_indices(m.n_states, k=1)
    x = ab.phi_dist[iu]
    push = pushforward_all(m, ab)
    d = ab.target.dist
    out = []
    for t in range(m.T - 1):
        gap = np.zeros(len(x))
        for a in range(m.n_actions):
            rows = push[t, :, a]
            cache: dict = {}
            for k, (i, j) in enumerate(zip(*iu)):
                key = (rows[i].tobytes(), rows[j].tobytes())
                if key not in cache:
                    cache[key] = w1(rows[i], rows[j], d)
                gap[k] = max(gap[k], cache[key])
        out.append((x, gap))
    return out


def fit_linear(x, gap) -> Modulus:
    """``F(x) = F(0) + L x``: offset from same-cell pairs, slope ``max gap / x`` elsewhere."""
    x = np.asarray(x, dtype=float)
    gap = np.asarray(gap, dtype=float)
    at0 = x <= 0
    offset = float(gap[at0].max(initial=0.0))
    slope = float((gap[~at0] / x[~at0]).max(initial=0.0))
    return Modulus.linear(slope, offset)


def fit_envelope(x, gap) -> Modulus:
    """Least concave non-decreasing majorant of the scatter ``(x, gap)``."""
    x = np.asarray(x, dtype=float)
    gap = np.asarray(gap, dtype=float)
    f0 = float(gap[x <= 0].max(initial=0.0))
    pts: dict = {0.0: f0}
    for xi, gi in zip(x[x > 0], gap[x > 0]):
        pts[float(xi)] = max(pts.get(float(xi), 0.0), float(gi))
    xs = sorted(pts)
    hull: list = []
    for xi in xs:
        p = (xi, pts[xi])
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly above the chord
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    # flatten once the hull starts to descend
    top = max(range(len(hull)), key=lambda i: (hull[i][1], -i))
    hull = hull[: top + 1]
    return Modulus(tuple(h[0] for h in hull), tuple(h[1] for h in hull), 0.0)


def check_dominates(F: Modulus, x, gap, what: str = "modulus") -> None:
    x = np.asarray(x, dtype=float)
    gap = np.asarray(gap, dtype=float)
    if not len(x):
        return
    excess = gap - F(x)
    tol = 1e-9 * np.maximum(1.0, np.abs(gap))
    if np.any(excess > tol):
        i = int(np.argmax(excess - tol))
        raise ModulusError(f"{what} misses the point ({x[i]}, {gap[i]}) by {excess[i]:.3g}")


def fit_moduli(m: Mdp, ab: Abstraction, kind: str = "linear"):
    """Fit cost moduli (one per step) and kernel moduli (one per transition).

    ``kind`` is ``"linear"`` or ``"envelope"``.  Both satisfy the smoothness
    inequalities for every pair of states; this is checked before returning.
    """
    fit = {"linear": fit_linear, "envelope": fit_envelope, "concave-envelope": fit_envelope}.get(kind)
    if fit is None:
        raise ValueError(f"unknown moduli kind {kind!r}")
    Fc, FP = [], []
    for t, (x, gap) in enumerate(cost_scatter(m, ab)):
        F = fit(x, gap)
        check_dominates(F, x, gap, f"cost modulus at t={t + 1}")
        Fc.append(F)
    for t, (x, gap) in enumerate(kernel_scatter(m, ab)):
        F = fit(x, gap)
        check_dominates(F, x, gap, f"kernel modulus at t={t + 1}")
        FP.append(F)
    return Fc, FP
