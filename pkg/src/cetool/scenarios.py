"""Generators for the example families and for randomized instances.

Every generator returns an :class:`Instance`: a concrete finite POMDP with
an abstraction, an estimator, and whatever closed-form quantities the
family comes with (an estimation-error ceiling, analytic moduli, ...).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.sparse.csgraph import shortest_path

from . import estimators as est
from .abstraction import Abstraction, pushforward_all
from .moduli import Modulus
from .pomdp import HistoryTree, Pomdp, budget_from_env
from .spaces import MetricSpace, StructureError
from .transport import w1


class SpecError(ValueError):
    """Scenario parameters are outside their documented range."""


@dataclass
class Instance:
    name: str
    family: str
    pomdp: Pomdp
    abstraction: Abstraction
    estimator: est.Estimator
    closed_form: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    bound_only: bool = False


# ---------------------------------------------------------------- grid worlds

def _grid_actions(ndim: int) -> list[tuple]:
    moves = [tuple([0] * ndim)]
    for k in range(ndim):
        for sgn in (-1, 1):
            v = [0] * ndim
            v[k] = sgn
            moves.append(tuple(v))
    return moves


def grid_world(shape, T: int, slip: float, kappa: float, goal=None):
    """Lattice walk: the chosen move succeeds with probability ``1 - slip``.

    Cost is the Manhattan distance to ``goal`` plus ``kappa`` per move.
    Returns ``(space, P (T-1,S,A,S), c (T,S,A), action labels)``.
    """
    shape = tuple(int(n) for n in shape)
    space = MetricSpace.grid(shape)
    coords = np.array(space.labels)
    n = len(space)
    moves = _grid_actions(len(shape))
    goal = tuple(n // 2 for n in shape) if goal is None else tuple(goal)
    g = space.labels.index(goal)
    P1 = np.zeros((n, len(moves), n))
    for a, mv in enumerate(moves):
        dest = np.clip(coords + np.array(mv), 0, np.array(shape) - 1)
        target = np.ravel_multi_index(dest.T, shape)
        P1[np.arange(n), a, target] += 1 - slip
        P1[np.arange(n), a, np.arange(n)] += slip
    cost = space.dist[:, g][:, None] + kappa * np.array([np.abs(m).sum() for m in moves])[None, :]
    P = np.broadcast_to(P1, (max(T - 1, 0),) + P1.shape).copy()
    c = np.broadcast_to(cost, (T,) + cost.shape).copy()
    labels = tuple("stay" if not any(m) else "".join(f"{v:+d}" for v in m) for m in moves)
    return space, P, c, labels


def noise_kernel(space: MetricSpace, r: float, kind: str = "sphere", tol: float = 1e-9) -> np.ndarray:
    """Observation kernel on ``Y = S`` with ``d(Y, S) <= r``.

    ``"sphere"`` is uniform over points at distance exactly ``r`` (so the
    error is always ``r``); ``"ball"`` is uniform over the closed ball.
    """
    d = space.dist
    if kind == "sphere":
        mask = np.abs(d - r) <= tol
    elif kind == "ball":
        mask = d <= r + tol
    else:
        raise SpecError(f"unknown noise kind {kind!r}")
    empty = np.flatnonzero(mask.sum(axis=1) == 0)
    if empty.size:
        raise SpecError(f"noise radius {r} does not fit: state {space.labels[empty[0]]} "
                        f"has no point at that distance")
    return mask / mask.sum(axis=1, keepdims=True)


def _pomdp_from_noise(space, P_S, c, N, init, action_labels) -> Pomdp:
    xi = init[:, None] * N
    P = P_S[..., None] * N[None, None, None]
    return Pomdp(space, xi, P, c, space.labels, action_labels)


@dataclass
class BoundedNoiseConfig:
    r: float = 1.0
    shape: tuple = (7,)
    T: int = 3
    noise: str = "sphere"
    slip: float = 0.2
    kappa: float = 0.5
    goal: tuple | None = None

    def validate(self):
        if self.r < 0:
            raise SpecError("r must be non-negative")
        if self.T < 1:
            raise SpecError("T must be at least 1")
        if not 0 <= self.slip <= 1:
            raise SpecError("slip must lie in [0, 1]")


def bounded_noise(cfg: BoundedNoiseConfig) -> Instance:
    cfg.validate()
    space, P_S, c, acts = grid_world(cfg.shape, cfg.T, cfg.slip, cfg.kappa, cfg.goal)
    N = noise_kernel(space, cfg.r, cfg.noise)
    init = np.full(len(space), 1.0 / len(space))
    p = _pomdp_from_noise(space, P_S, c, N, init, acts)
    ab = Abstraction.identity(space)
    g = est.last_observation(np.arange(len(space)))
    return Instance(f"bounded_noise(r={cfg.r})", "bounded_noise", p, ab, g,
                    closed_form={"eta_ceiling": float(cfg.r), "r": float(cfg.r)},
                    extras={"noise": N})


@dataclass
class IntermittentConfig:
    r: float = 1.0
    R: float = 2.0
    p: float = 0.2
    shape: tuple = (7,)
    T: int = 3
    noise: str = "sphere"
    slip: float = 0.2
    kappa: float = 0.5
    goal: tuple | None = None

    def validate(self):
        if not 0 <= self.r <= self.R:
            raise SpecError("need 0 <= r <= R")
        if not 0 <= self.p <= 1:
            raise SpecError("p must lie in [0, 1]")
        if self.T < 1:
            raise SpecError("T must be at least 1")


def intermittent(cfg: IntermittentConfig) -> Instance:
    """Good observations within ``r`` with probability ``1 - p``, bad ones within ``R``."""
    cfg.validate()
    space, P_S, c, acts = grid_world(cfg.shape, cfg.T, cfg.slip, cfg.kappa, cfg.goal)
    good = noise_kernel(space, cfg.r, cfg.noise)
    if cfg.p == 0 or cfg.r == cfg.R:
        bad = good
        N = good
    else:
        bad = noise_kernel(space, cfg.R, cfg.noise)
        N = (1 - cfg.p) * good + cfg.p * bad
    init = np.full(len(space), 1.0 / len(space))
    p = _pomdp_from_noise(space, P_S, c, N, init, acts)
    ab = Abstraction.identity(space)
    g = est.last_observation(np.arange(len(space)))
    ceiling = (1 - cfg.p) * cfg.r + cfg.p * cfg.R
    return Instance(f"intermittent(r={cfg.r},R={cfg.R},p={cfg.p})", "intermittent", p, ab, g,
                    closed_form={"eta_ceiling": ceiling, "p": cfg.p},
                    extras={"good": good, "bad": bad, "p": cfg.p})


def bad_event_posterior(inst: Instance, tree: HistoryTree | None = None) -> float:
    """Largest posterior probability of a bad observation over reachable histories.

    The error ceiling ``(1 - p) r + p R`` presumes this never exceeds ``p``.
    """
    p, q = inst.pomdp, inst.extras["p"]
    if q == 0:
        return 0.0
    good, bad = inst.extras["good"], inst.extras["bad"]
    tree = tree or HistoryTree.build(p)
    worst = 0.0
    init = p.xi.sum(axis=1)
    for t, lv in enumerate(tree.levels, start=1):
        if t == 1:
            prior = np.broadcast_to(init, lv.beliefs.shape)
        else:
            par = tree.levels[t - 2]
            prior = np.einsum("ks,ksj->kj", par.beliefs[lv.parent], p.P_S[t - 2][:, lv.action].transpose(1, 0, 2))
        y = np.array([h[-1] for h in lv.histories])
        num = q * (prior * bad[:, y].T).sum(axis=1)
        den = (prior * ((1 - q) * good[:, y].T + q * bad[:, y].T)).sum(axis=1)
        worst = max(worst, float((num / den).max()))
    return worst


@dataclass
class QuantizedConfig:
    r: float = 1.0
    n: int = 9
    cell: int = 3
    T: int = 3
    noise: str = "ball"
    slip: float = 0.2
    kappa: float = 0.5

    def validate(self):
        if self.r < 0:
            raise SpecError("r must be non-negative")
        if not 1 <= self.cell <= self.n:
            raise SpecError("cell width must lie in 1..n")


def quantized(cfg: QuantizedConfig) -> Instance:
    """Bounded noise on a path, consecutive cells with middle representatives."""
    cfg.validate()
    space, P_S, c, acts = grid_world((cfg.n,), cfg.T, cfg.slip, cfg.kappa)
    N = noise_kernel(space, cfg.r, cfg.noise)
    init = np.full(cfg.n, 1.0 / cfg.n)
    p = _pomdp_from_noise(space, P_S, c, N, init, acts)
    phi = np.arange(cfg.n) // cfg.cell
    reps = [int(np.flatnonzero(phi == k)[len(np.flatnonzero(phi == k)) // 2])
            for k in range(phi.max() + 1)]
    ab = Abstraction.from_partition(space, phi, reps, lifting="dirac")
    g = est.quantized_last_observation(ab, np.arange(cfg.n))
    R = ab.cell_radius()
    return Instance(f"quantized(r={cfg.r},cell={cfg.cell})", "quantized", p, ab, g,
                    closed_form={"eta_ceiling": cfg.r + 2 * R, "r": cfg.r, "R": R})


# ------------------------------------------------------------------ adaptive

@dataclass
class AdaptiveConfig:
    n_x: int = 4
    thetas: tuple = (1.0, 2.0)
    prior: tuple | None = None
    T: int = 3
    slip: float = 0.2
    kappa: float = 0.3
    estimator: str = "map"

    def validate(self):
        if len(self.thetas) < 1 or len(set(self.thetas)) != len(self.thetas):
            raise SpecError("thetas must be distinct")
        if self.prior is not None and (len(self.prior) != len(self.thetas) or min(self.prior) < 0):
            raise SpecError("prior must be a distribution over thetas")
        if self.estimator not in ("map", "mmse"):
            raise SpecError("estimator must be 'map' or 'mmse'")


def adaptive(cfg: AdaptiveConfig) -> Instance:
    """Unknown cost parameter revealed through the realised cost.

    State ``(x, theta)``, observation ``(x_t, cost index of the previous step)``;
    the cost ``theta (x + 1) + kappa |a|`` makes ``theta`` identifiable.
    """
    cfg.validate()
    nx, th = cfg.n_x, np.asarray(cfg.thetas, dtype=float)
    nth = len(th)
    prior = np.full(nth, 1 / nth) if cfg.prior is None else np.asarray(cfg.prior, float) / sum(cfg.prior)
    xspace, PX, _, acts = grid_world((nx,), cfg.T, cfg.slip, 0.0)
    moves = np.array([0, -1, 1])
    ell = th[None, :, None] * (np.arange(nx)[:, None, None] + 1) + cfg.kappa * np.abs(moves)[None, None, :]
    values = np.unique(np.round(ell, 12))
    cost_idx = np.searchsorted(values, np.round(ell, 12))          # (nx, nth, A)
    nc = len(values) + 1                                           # slot 0 is "no cost yet"
    labels = [(int(x), float(t)) for x in range(nx) for t in th]
    xs, ts = np.divmod(np.arange(nx * nth), nth)
    d = np.abs(xs[:, None] - xs[None, :]) + np.abs(th[ts][:, None] - th[ts][None, :])
    space = MetricSpace(tuple(labels), d)
    n, na, ny = nx * nth, len(moves), nx * nc
    xi = np.zeros((n, ny))
    xi[np.arange(n), xs * nc] = np.full(nx, 1 / nx)[xs] * prior[ts]
    P = np.zeros((cfg.T - 1, n, na, n, ny))
    for s in range(n):
        for a in range(na):
            for x2 in range(nx):
                s2 = x2 * nth + ts[s]
                P[:, s, a, s2, x2 * nc + 1 + cost_idx[xs[s], ts[s], a]] = PX[0, xs[s], a, x2] if cfg.T > 1 else 0
    c = np.broadcast_to(ell.reshape(n, na), (cfg.T, n, na)).copy()
    obs_labels = tuple((x, None if k == 0 else float(values[k - 1])) for x in range(nx) for k in range(nc))
    p = Pomdp(space, xi, P, c, obs_labels, acts)
    ab = Abstraction.identity(space)

    def rule(h, b):
        marg = b.reshape(nx, nth)
        x = int(h[-1]) // nc
        post = marg.sum(axis=0)
        if cfg.estimator == "map":
            k = int(np.argmax(post))
        else:
            k = int(np.argmin(np.abs(th - post @ th)))
        return x * nth + k

    g = est.Estimator(f"adaptive-{cfg.estimator}", rule, p, needs_belief=True)
    # |theta (x+1) - theta' (x'+1)| <= max theta |x - x'| + n_x |theta - theta'|;
    # shared slip noise couples the positions, and theta never moves
    targets = {"Lc_target": float(max(th.max(), nx)), "LP_target": 1.0}
    return Instance(f"adaptive(thetas={tuple(cfg.thetas)})", "adaptive", p, ab, g,
                    closed_form=targets, extras={"n_x": nx, "thetas": th, "n_cost_slots": nc})


# ----------------------------------------------------------- event-triggered

@dataclass
class EventTriggeredConfig:
    n_x: int = 5
    r: float = 1.0
    T: int = 3
    noise: float = 0.25
    kappa: float = 0.3
    init: tuple | None = None

    def validate(self):
        if self.r < 0:
            raise SpecError("r must be non-negative")
        if not 0 <= self.noise <= 0.5:
            raise SpecError("noise must lie in [0, 0.5]")


def event_triggered(cfg: EventTriggeredConfig) -> Instance:
    """Sensor sends ``x_t`` only when it is more than ``r`` from the controller's prediction.

    State ``(x, xhat_{t|t-1})``; observation ``x`` or the null symbol
    (index ``n_x``).  The estimate recursion is folded into the kernel.
    """
    cfg.validate()
    nx, T = cfg.n_x, cfg.T
    xspace = MetricSpace.path(nx)
    moves = np.array([-1, 0, 1])
    w = np.array([cfg.noise, 1 - 2 * cfg.noise, cfg.noise])
    init = np.full(nx, 1 / nx) if cfg.init is None else np.asarray(cfg.init, float) / sum(cfg.init)
    xhat0 = int(np.clip(np.rint(init @ np.arange(nx)), 0, nx - 1))
    goal = nx // 2
    cost = np.abs(np.arange(nx) - goal)[:, None] + cfg.kappa * np.abs(moves)[None, :]
    PX = np.zeros((nx, 3, nx))
    for x in range(nx):
        for a, mv in enumerate(moves):
            for wi, dw in enumerate((-1, 0, 1)):
                PX[x, a, np.clip(x + mv + dw, 0, nx - 1)] += w[wi]

    def predict(z, a):
        return int(np.clip(z + moves[a], 0, nx - 1))

    def sends(x, xh):
        return abs(x - xh) > cfg.r

    n, ny = nx * nx, nx + 1
    E = nx
    xs, xh = np.divmod(np.arange(n), nx)
    space = MetricSpace(tuple((int(a), int(b)) for a, b in zip(xs, xh)),
                        np.abs(xs[:, None] - xs[None, :]) + np.abs(xh[:, None] - xh[None, :]))
    xi = np.zeros((n, ny))
    for x in range(nx):
        xi[x * nx + xhat0, x if sends(x, xhat0) else E] = init[x]
    P = np.zeros((max(T - 1, 0), n, 3, n, ny))
    for s in range(n):
        x, z = xs[s], xh[s]
        ztt = x if sends(x, z) else z
        for a in range(3):
            z2 = predict(ztt, a)
            for x2 in range(nx):
                P[:, s, a, x2 * nx + z2, x2 if sends(x2, z2) else E] += PX[x, a, x2]
    c = np.broadcast_to(cost[xs], (T, n, 3)).copy()
    p = Pomdp(space, xi, P, c, tuple(range(nx)) + ("E",), ("-1", "0", "+1"))
    lam = np.zeros((nx, n))
    lam[np.arange(nx), np.arange(nx) * nx + np.arange(nx)] = 1.0
    ab = Abstraction(space, xspace, xs, lam, lam)
    g = est.recursive(lambda y: y if y != E else xhat0,
                      lambda z, a, y: y if y != E else predict(z, a), name="event-triggered")
    return Instance(f"event_triggered(r={cfg.r})", "event_triggered", p, ab, g,
                    closed_form={"eta_ceiling": float(cfg.r), "r": float(cfg.r)},
                    extras={"n_x": nx, "xhat0": xhat0, "null": E, "predict": predict})


def check_event_trajectories(inst: Instance, n: int, rng: np.random.Generator) -> dict:
    """Simulate the CE controller and audit the triggering rule on every step.

    Returns counts of steps where transmission disagrees with the rule and
    where the post-observation estimate is more than ``r`` off.
    """
    from .bounds import ce_policy
    from .abstraction import build_abstract_mdp
    from .mdp import backward_induction

    p, g, ex = inst.pomdp, inst.estimator, inst.extras
    nx, E, r = ex["n_x"], ex["null"], inst.closed_form["r"]
    pi, _ = backward_induction(build_abstract_mdp(p.mdp(), inst.abstraction))
    mu = ce_policy(pi, g)
    from .pomdp import simulate
    states, obs, acts, _ = simulate(p, mu, n, rng)
    x, xprior = np.divmod(states, nx)
    sent = obs != E
    rule = np.abs(x - xprior) > r
    trig_mismatch = int((sent != rule).sum())
    est_err = 0
    for k in range(n):
        h = (int(obs[k, 0]),)
        for t in range(p.T):
            if t:
                h = h + (int(acts[k, t - 1]), int(obs[k, t]))
            if abs(x[k, t] - g(h)) > r + 1e-12:
                est_err += 1
    return {"trajectories": n, "steps": n * p.T, "trigger_mismatches": trig_mismatch,
            "estimate_violations": est_err, "transmissions": int(sent.sum())}


# ----------------------------------------------------------------- mean field

@dataclass
class MeanFieldConfig:
    n: int = 2
    grid: int = 5
    h: float = 1.0
    alpha: tuple | None = None
    r: tuple | None = None          # per-particle noise radius, multiple of h
    T: int = 2
    rho: float = 0.5                # Lipschitz constant of the mean drift
    gamma: tuple | None = None      # bounds on the per-particle terms
    L_lbar: float = 1.0
    beta: float = 0.2
    kappa: float = 0.3
    w_prob: tuple = (0.25, 0.5, 0.25)

    def validate(self):
        if self.n < 1 or self.grid < 2:
            raise SpecError("need at least one particle and two grid points")
        a = self.alphas()
        if np.any(a < 0) or abs(a.sum() - 1) > 1e-12:
            raise SpecError("weights must be non-negative and sum to 1")
        for ri in self.radii():
            k = ri / self.h
            if ri < 0 or abs(k - round(k)) > 1e-9:
                raise SpecError("noise radii must be non-negative multiples of the grid spacing")
        if 2 * max(self.gammas()) > (self.grid - 1) * self.h:
            raise SpecError("per-particle terms do not fit inside the grid")

    def alphas(self):
        return np.full(self.n, 1 / self.n) if self.alpha is None else np.asarray(self.alpha, float)

    def radii(self):
        return np.full(self.n, self.h) if self.r is None else np.asarray(self.r, float)

    def gammas(self):
        return np.full(self.n, 0.3 * self.h) if self.gamma is None else np.asarray(self.gamma, float)


def mean_field(cfg: MeanFieldConfig) -> Instance:
    """Particles on a 1-D grid driven by a common mean drift plus bounded individual terms.

    The abstract space is the exact set of attainable weighted means, so
    ``phi`` needs no snapping.  Rounding the next particle positions to the
    grid perturbs each individual term by at most ``h/2``.
    """
    cfg.validate()
    n, G, h, T = cfg.n, cfg.grid, cfg.h, cfg.T
    alpha, radii, gam = cfg.alphas(), cfg.radii(), cfg.gammas()
    pts = h * np.arange(G)
    lo, hi, c0 = pts[0], pts[-1], pts[-1] / 2
    X = np.array(list(np.ndindex(*(G,) * n)))               # (S, n) grid indices
    S = len(X)
    pos = pts[X]
    means = pos @ alpha
    # round only to merge equal means; the points themselves stay exact
    _, first, phi = np.unique(np.round(means, 9), return_index=True, return_inverse=True)
    mvals = means[first]
    target = MetricSpace.from_points(mvals)
    space = MetricSpace(tuple(map(tuple, X.tolist())),
                        np.abs(pos[:, None, :] - pos[None, :, :]).sum(-1))
    u = h * np.array([-1.0, 0.0, 1.0])
    ws = h * np.array([-1.0, 0.0, 1.0])
    pw = np.asarray(cfg.w_prob, float)
    margin = gam.max()

    def fbar(m, a, w):
        return np.clip(cfg.rho * (m - c0) + c0 + u[a] + w, lo + margin, hi - margin)

    def fi(x, a, w):
        return gam * np.sin(x + np.arange(n) + a + w)

    succ = np.zeros((len(u), len(ws), S), dtype=int)
    for a in range(len(u)):
        for wi, w in enumerate(ws):
            nxt = fbar(means, a, w)[:, None] + fi(pos, a, w)
            idx = np.clip(np.rint((nxt - lo) / h), 0, G - 1).astype(int)
            succ[a, wi] = np.ravel_multi_index(idx.T, (G,) * n)
    PS = np.zeros((S, len(u), S))
    for a in range(len(u)):
        for wi in range(len(ws)):
            np.add.at(PS, (np.arange(S), a, succ[a, wi]), pw[wi])
    lbar = cfg.L_lbar * np.abs(means[:, None] - c0) + cfg.kappa * np.abs(u)[None, :] / h
    ell = cfg.beta * np.cos(pos @ (np.arange(n) + 1.0))[:, None] + 0 * u[None, :]
    cost = lbar + ell

    # observations: y^i = x^i + k h with |k h| <= r^i, uniform over {-r^i, 0, r^i}
    kmax = int(round(radii.max() / h))
    Gy = G + 2 * kmax
    O = np.ones((S, 1))
    for i in range(n):
        k = int(round(radii[i] / h))
        offs = sorted({-k, 0, k})
        Oi = np.zeros((G, Gy))
        for o in offs:
            Oi[np.arange(G), np.arange(G) + kmax + o] = 1 / len(offs)
        O = (O[:, :, None] * Oi[X[:, i]][:, None, :]).reshape(S, -1)
    ny = O.shape[1]
    init = np.full(S, 1 / S)
    xi = init[:, None] * O
    P = np.broadcast_to(PS[..., None] * O[None, None], (max(T - 1, 0), S, len(u), S, ny)).copy()
    c = np.broadcast_to(cost, (T, S, len(u))).copy()
    p = Pomdp(space, xi, P, c, tuple(range(ny)), ("-h", "0", "+h"))

    # lifting: the fiber point nearest to the diagonal m * 1
    lam = np.zeros((len(mvals), S))
    for k, m in enumerate(mvals):
        fib = np.flatnonzero(phi == k)
        j = fib[np.argmin(np.abs(pos[fib] - m).sum(axis=1))]
        lam[k, j] = 1.0
    ab = Abstraction(space, target, phi, lam, lam)

    ygrid = h * (np.arange(Gy) - kmax)
    Y = np.array(list(np.ndindex(*(Gy,) * n)))
    ymean = np.clip(ygrid[Y] @ alpha, mvals[0], mvals[-1])
    snap = np.abs(ymean[:, None] - mvals[None, :]).argmin(axis=1)
    snap_slack = float(np.abs(ymean - mvals[snap]).max())
    g = est.last_observation(snap, name="weighted-mean-observation")
    rbar = float(alpha @ radii)
    gbar = float(alpha @ gam)
    closed = {
        "Fc": Modulus.linear(cfg.L_lbar, 2 * cfg.beta),
        "FP": Modulus.linear(cfg.rho, 2 * gbar),
        "Fc_slack": 0.0,
        "FP_slack": h,
        "eta_ceiling": rbar + snap_slack,
        "rbar": rbar, "gbar": gbar, "snap_slack": snap_slack,
        "L_lbar": cfg.L_lbar, "L_fbar": cfg.rho, "beta": cfg.beta,
    }
    return Instance(f"mean_field(n={n},grid={G})", "mean_field", p, ab, g, closed_form=closed,
                    extras={"succ": succ, "w_prob": pw, "means": means, "mvals": mvals},
                    bound_only=n > 3)


def coupling_check(inst: Instance, pairs=None):
    """Cost of the shared-noise coupling versus the exact W1 of next-mean laws.

    Compares, for each ``(s, s', a)``, ``sum_w P(w) |M(s, w) - M(s', w)|``
    with ``W1(P^phi(s, a), P^phi(s', a))``.  Returns ``(coupling, w1)`` arrays.
    """
    ex = inst.extras
    succ, pw, means = ex["succ"], ex["w_prob"], ex["means"]
    ab = inst.abstraction
    push = pushforward_all(inst.pomdp.mdp(), ab)[0]
    S = len(means)
    if pairs is None:
        pairs = [(i, j, a) for i in range(S) for j in range(i + 1, S) for a in range(succ.shape[0])]
    cost, dist = [], []
    for i, j, a in pairs:
        cost.append(float(pw @ np.abs(means[succ[a, :, i]] - means[succ[a, :, j]])))
        dist.append(w1(push[i, a], push[j, a], ab.target.dist))
    return np.array(cost), np.array(dist)


# ------------------------------------------------------------------- random

VARIANTS = ("identity-lastobs", "identity-map", "partition-dirac-map",
            "partition-uniform-pmr", "hashed")


@dataclass
class RandomConfig:
    n_states: int = 3
    n_obs: int = 3
    n_actions: int = 2
    T: int = 3
    seed: int = 0
    variant: str = "identity-map"
    sparsity: float = 0.3

    def validate(self):
        if min(self.n_states, self.n_obs, self.n_actions, self.T) < 1:
            raise SpecError("sizes must be positive")
        if self.variant not in VARIANTS:
            raise SpecError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if not 0 <= self.sparsity < 1:
            raise SpecError("sparsity must lie in [0, 1)")


def _sparse_rows(rng, shape, sparsity):
    """Random distributions over the last axis with random zeros (never an all-zero row)."""
    w = rng.gamma(1.0, size=shape)
    keep = rng.random(shape) >= sparsity
    forced = rng.integers(shape[-1], size=shape[:-1])
    np.put_along_axis(keep, forced[..., None], True, axis=-1)
    w = w * keep
    return w / w.sum(axis=-1, keepdims=True)


def random_metric(rng, n: int) -> MetricSpace:
    """Shortest-path closure of random positive edge weights on the complete graph."""
    if n == 1:
        return MetricSpace((0,), np.zeros((1, 1)))
    wts = rng.uniform(0.5, 2.0, size=(n, n))
    wts = np.triu(wts, 1)
    wts = wts + wts.T
    return MetricSpace(tuple(range(n)), shortest_path(wts, method="FW", directed=False))


def random_model(cfg: RandomConfig) -> Pomdp:
    rng = np.random.default_rng([cfg.seed, 0])
    n, ny, na, T = cfg.n_states, cfg.n_obs, cfg.n_actions, cfg.T
    space = random_metric(rng, n)
    xi = _sparse_rows(rng, (n * ny,), cfg.sparsity).reshape(n, ny)
    P = _sparse_rows(rng, (T - 1, n, na, n * ny), cfg.sparsity).reshape(T - 1, n, na, n, ny)
    c = rng.uniform(0, 1, size=(T, n, na))
    return Pomdp(space, xi, P, c)


def random_instance(cfg: RandomConfig) -> Instance:
    cfg.validate()
    p = random_model(cfg)
    n = cfg.n_states
    rng = np.random.default_rng([cfg.seed, 1 + VARIANTS.index(cfg.variant)])
    if cfg.variant.startswith("partition"):
        k = int(rng.integers(1, n + 1))
        phi = np.concatenate([np.arange(k), rng.integers(k, size=n - k)])
        rng.shuffle(phi)
        reps = [int(rng.choice(np.flatnonzero(phi == j))) for j in range(k)]
        lifting = "dirac" if "dirac" in cfg.variant else "uniform"
        ab = Abstraction.from_partition(p.space, phi, reps, lifting)
    else:
        ab = Abstraction.identity(p.space)
    if cfg.variant == "identity-lastobs":
        g = est.last_observation(rng.integers(n, size=cfg.n_obs))
    elif cfg.variant == "hashed":
        g = est.hashed(cfg.seed, len(ab.target))
    elif cfg.variant.endswith("map"):
        g = est.map_posterior(p, ab)
    else:
        g = est.posterior_mean_representative(p, ab)
    name = f"random(seed={cfg.seed},{n}x{cfg.n_obs}x{cfg.n_actions}x{cfg.T},{cfg.variant})"
    return Instance(name, "random", p, ab, g)


def suite_sizes(seed: int) -> tuple[int, int, int, int]:
    """Sizes ``(|S|, |Y|, |A|, T)`` used for seed ``seed`` of the randomized suite."""
    rng = np.random.default_rng([seed, 99])
    return (int(rng.integers(2, 5)), int(rng.integers(2, 5)),
            int(rng.integers(2, 4)), int(rng.integers(2, 5)))


# --------------------------------------------------------------- dispatching

FAMILIES = {
    "bounded_noise": (BoundedNoiseConfig, bounded_noise),
    "intermittent": (IntermittentConfig, intermittent),
    "quantized": (QuantizedConfig, quantized),
    "adaptive": (AdaptiveConfig, adaptive),
    "event_triggered": (EventTriggeredConfig, event_triggered),
    "mean_field": (MeanFieldConfig, mean_field),
    "random": (RandomConfig, random_instance),
}


@dataclass
class ScenarioSpec:
    family: str
    params: dict = field(default_factory=dict)
    name: str | None = None

    def config(self):
        if self.family not in FAMILIES:
            raise SpecError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        cls = FAMILIES[self.family][0]
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(self.params) - known
        if extra:
            raise SpecError(f"{self.family}: unknown parameter(s) {sorted(extra)}")
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in self.params.items()}
        return cls(**params)


def generate(spec: ScenarioSpec) -> Instance:
    cfg = spec.config()
    try:
        inst = FAMILIES[spec.family][1](cfg)
    except StructureError as exc:
        raise SpecError(f"{spec.family}: {exc}") from exc
    if spec.name:
        inst.name = spec.name
    return inst


def fits_budget(inst: Instance, budget: int | None = None) -> bool:
    budget = budget_from_env() if budget is None else budget
    return inst.pomdp.worst_case_nodes() <= budget or _reachable_fits(inst.pomdp, budget)


def _reachable_fits(p: Pomdp, budget: int) -> bool:
    from .pomdp import BudgetExceeded
    try:
        HistoryTree.build(p, budget=budget)
    except BudgetExceeded:
        return False
    return True
