"""Certainty-equivalent policies and their sub-optimality bounds.

The pipeline is: build the abstract MDP, solve it, act with its optimal
policy at the estimated abstract state, and compare the exact value of that
policy with the exact POMDP optimum on every reachable history.  The
bound is ``2 * alpha_t`` with

    eps_t   = Fc_t(eta_t)
    delta_t = FP_t(eta_t) + eta_{t+1}              (t <= T - 1)
    alpha_t = eps_t + sum_{tau=t}^{T-1} [delta_tau * Lip(V~_{tau+1}) + eps_{tau+1}]
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .abstraction import Abstraction, build_abstract_mdp, pushforward_all
from .estimators import Estimator
from .mdp import (Mdp, backward_induction, evaluate_markov_policy, lipschitz_of,
                  recursive_lipschitz_bound)
from .moduli import Modulus, fit_moduli
from .pomdp import (HistoryTree, Pomdp, StructureError, evaluate_history_policy,
                    history_key, horizon_of, optimal_value)
from .transport import w1

TOL = 1e-9

CSV_COLUMNS = ("instance_id", "t", "eta", "eps", "delta", "lipV", "alpha", "bound", "gap", "slack")


class BoundViolation(AssertionError):
    """The measured gap exceeds the computed bound on some history."""

    def __init__(self, t: int, history, gap: float, bound: float):
        self.t, self.history, self.gap, self.bound = t, tuple(history), gap, bound
        super().__init__(f"t={t} history {history_key(history)}: gap {gap!r} > bound {bound!r}")


@dataclass
class CertaintyEquivalentPolicy:
    """``mu_t(h_t) = pi~_t(g_t(h_t))``."""

    pi: np.ndarray
    estimator: Estimator

    def __call__(self, history, belief=None) -> int:
        t = horizon_of(history)
        return int(self.pi[t - 1, self.estimator(history, belief)])


def ce_policy(pi_abstract, g: Estimator) -> CertaintyEquivalentPolicy:
    return CertaintyEquivalentPolicy(np.asarray(pi_abstract, dtype=int), g)


@dataclass
class EtaResult:
    eta: np.ndarray                  # (T,)
    worst: list                      # argmax history per step
    per_node: list                   # expected error per reachable node, per level
    estimates: list                  # g(h) per reachable node, per level


def compute_eta(p: Pomdp, ab: Abstraction, g: Estimator, tree: HistoryTree | None = None,
                budget: int | None = None) -> EtaResult:
    """Worst-case conditional expected estimation error over reachable histories."""
    tree = tree or HistoryTree.build(p, budget=budget)
    D = ab.target.dist[ab.phi]
    eta = np.zeros(p.T)
    worst, per_node, estimates = [], [], []
    for t, lv in enumerate(tree.levels, start=1):
        est = np.array([g(h, lv.beliefs[i]) for i, h in enumerate(lv.histories)], dtype=int)
        if est.size and (est.min() < 0 or est.max() >= len(ab.target)):
            raise StructureError(f"estimator returned an index outside the abstract space at t={t}")
        err = np.einsum("ks,ks->k", lv.beliefs, D[:, est].T)
        i = int(np.argmax(err))
        eta[t - 1] = err[i]
        worst.append(lv.histories[i])
        per_node.append(err)
        estimates.append(est)
    return EtaResult(eta, worst, per_node, estimates)


@dataclass
class BoundCore:
    eps: np.ndarray     # (T,)
    delta: np.ndarray   # (T,), nan at T
    alpha: np.ndarray   # (T,)
    bound: np.ndarray   # (T,)


def theorem_bound(eta, Fc, FP, lipV) -> BoundCore:
    """Assemble ``eps``, ``delta``, ``alpha`` and ``2 alpha`` from their ingredients.

    ``lipV[t]`` is ``Lip(V~_{t+1})`` for 0-based ``t``, so ``lipV`` has length
    ``T`` (or ``T + 1`` with a trailing zero); ``FP`` has length ``T - 1``.
    """
    eta = np.asarray(eta, dtype=float)
    T = len(eta)
    if np.any(eta < 0):
        raise StructureError("estimation errors must be non-negative")
    if len(Fc) != T or len(FP) < T - 1:
        raise StructureError("need one cost modulus per step and one kernel modulus per transition")
    lipV = np.asarray(lipV, dtype=float)
    eps = np.array([Fc[t](eta[t]) for t in range(T)])
    delta = np.full(T, np.nan)
    for t in range(T - 1):
        delta[t] = FP[t](eta[t]) + eta[t + 1]
    alpha = np.zeros(T)
    for t in range(T):
        alpha[t] = eps[t] + sum(delta[tau] * lipV[tau + 1] + eps[tau + 1] for tau in range(t, T - 1))
    return BoundCore(eps, delta, alpha, 2.0 * alpha)


def alpha_terms(eps, delta, lipV, t: int) -> list[tuple[str, float]]:
    """Additive pieces of ``alpha_t`` (1-based ``t``)."""
    T = len(eps)
    terms = [(f"eps_{t}", float(eps[t - 1]))]
    for tau in range(t, T):
        terms.append((f"delta_{tau}*Lip(V_{tau + 1})", float(delta[tau - 1] * lipV[tau])))
        terms.append((f"eps_{tau + 1}", float(eps[tau])))
    return terms


@dataclass
class BoundReport:
    instance_id: str
    T: int
    eta: np.ndarray
    eps: np.ndarray
    delta: np.ndarray
    lipV: np.ndarray
    alpha: np.ndarray
    bound: np.ndarray
    gap: np.ndarray
    slack: np.ndarray
    root_gaps: list = field(default_factory=list)
    worst_history: list = field(default_factory=list)
    eta_history: list = field(default_factory=list)
    moduli_kind: str = "linear"
    lip_mode: str = "exact"
    Fc: list = field(default_factory=list)
    FP: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self):
        for t in range(1, self.T + 1):
            yield {
                "instance_id": self.instance_id, "t": t,
                "eta": self.eta[t - 1], "eps": self.eps[t - 1], "delta": self.delta[t - 1],
                "lipV": self.lipV[t - 1], "alpha": self.alpha[t - 1], "bound": self.bound[t - 1],
                "gap": self.gap[t - 1], "slack": self.slack[t - 1],
            }

    def to_dict(self) -> dict:
        def arr(a):
            return [None if (isinstance(v, float) and math.isnan(v)) else v
                    for v in np.asarray(a, dtype=float).tolist()]

        return {
            "instance_id": self.instance_id, "T": self.T,
            "eta": arr(self.eta), "eps": arr(self.eps), "delta": arr(self.delta),
            "lipV": arr(self.lipV), "alpha": arr(self.alpha), "bound": arr(self.bound),
            "gap": arr(self.gap), "slack": arr(self.slack),
            "root_gaps": arr(self.root_gaps),
            "worst_history": [history_key(h) if h is not None else None for h in self.worst_history],
            "eta_history": [history_key(h) if h is not None else None for h in self.eta_history],
            "moduli_kind": self.moduli_kind, "lip_mode": self.lip_mode,
            "Fc": [F.to_dict() for F in self.Fc], "FP": [F.to_dict() for F in self.FP],
            "violations": self.violations, "notes": self.notes, "passed": self.passed,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        def arr(key):
            return np.array([np.nan if v is None else v for v in d.get(key, [])], dtype=float)

        return cls(
            instance_id=d["instance_id"], T=d["T"], eta=arr("eta"), eps=arr("eps"),
            delta=arr("delta"), lipV=arr("lipV"), alpha=arr("alpha"), bound=arr("bound"),
            gap=arr("gap"), slack=arr("slack"), root_gaps=list(arr("root_gaps")),
            moduli_kind=d.get("moduli_kind", "linear"), lip_mode=d.get("lip_mode", "exact"),
            Fc=[Modulus.from_dict(x) for x in d.get("Fc", [])],
            FP=[Modulus.from_dict(x) for x in d.get("FP", [])],
            violations=d.get("violations", []), notes=d.get("notes", []), extra=d.get("extra", {}),
        )


def format_float(x) -> str:
    """Fixed 17-significant-digit rendering; empty for undefined values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        for row in rep.rows():
            w.writerow([row["instance_id"]] + [format_float(row[c]) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


@dataclass
class Solution:
    """Everything the pipeline computes for one instance."""

    abstract_mdp: Mdp
    pi: np.ndarray
    V: np.ndarray
    lipV: np.ndarray
    Fc: list
    FP: list
    tree: HistoryTree
    eta: EtaResult
    optimal: object
    ce: object
    policy: CertaintyEquivalentPolicy


def abstract_lipschitz(mt: Mdp, V: np.ndarray, mode: str = "exact") -> np.ndarray:
    """``Lip(V~_t)`` for t = 1..T+1 (last entry zero)."""
    if mode == "exact":
        return np.array([lipschitz_of(V[t], mt.space) for t in range(mt.T + 1)])
    if mode == "recursive":
        return recursive_lipschitz_bound(mt)
    raise ValueError(f"unknown Lipschitz mode {mode!r}")


def solve(p: Pomdp, ab: Abstraction, g: Estimator, kind: str = "linear", lip_mode: str = "exact",
          budget: int | None = None, moduli=None, tree: HistoryTree | None = None) -> Solution:
    mt = build_abstract_mdp(p.mdp(), ab)
    pi, V = backward_induction(mt)
    lipV = abstract_lipschitz(mt, V, lip_mode)
    Fc, FP = moduli if moduli is not None else fit_moduli(p.mdp(), ab, kind)
    tree = tree or HistoryTree.build(p, budget=budget)
    eta = compute_eta(p, ab, g, tree)
    mu = ce_policy(pi, g)
    opt = optimal_value(p, tree)
    ce = evaluate_history_policy(p, mu, tree)
    return Solution(mt, pi, V, lipV, Fc, FP, tree, eta, opt, ce, mu)


def verify_theorem(p: Pomdp, ab: Abstraction, g: Estimator, kind: str = "linear",
                   lip_mode: str = "exact", budget: int | None = None, strict: bool = True,
                   instance_id: str = "instance", moduli=None, tol: float = TOL,
                   solution: Solution | None = None) -> BoundReport:
    """Compare the exact CE sub-optimality with ``2 alpha_t`` on every reachable history.

    With ``strict`` a violation raises :class:`BoundViolation`; otherwise it is
    recorded in the report.
    """
    sol = solution or solve(p, ab, g, kind, lip_mode, budget, moduli)
    core = theorem_bound(sol.eta.eta, sol.Fc, sol.FP, sol.lipV)
    T = p.T
    gap = np.zeros(T)
    worst = []
    violations = []
    for t in range(1, T + 1):
        diff = sol.ce.values[t - 1] - sol.optimal.values[t - 1]
        i = int(np.argmax(diff))
        gap[t - 1] = diff[i]
        hist = sol.tree.levels[t - 1].histories
        worst.append(hist[i])
        over = np.flatnonzero(diff > core.bound[t - 1] + tol)
        for j in over:
            if strict:
                raise BoundViolation(t, hist[j], float(diff[j]), float(core.bound[t - 1]))
            violations.append({"t": t, "history": history_key(hist[j]),
                               "gap": float(diff[j]), "bound": float(core.bound[t - 1])})
    return BoundReport(
        instance_id=instance_id, T=T, eta=sol.eta.eta, eps=core.eps, delta=core.delta,
        lipV=sol.lipV[:T], alpha=core.alpha, bound=core.bound, gap=gap,
        slack=core.bound - gap,
        root_gaps=list(sol.ce.values[0] - sol.optimal.values[0]),
        worst_history=worst, eta_history=sol.eta.worst, moduli_kind=kind, lip_mode=lip_mode,
        Fc=list(sol.Fc), FP=list(sol.FP), violations=violations,
        notes=["eta and gaps are maxima over positive-probability histories only"],
    )


@dataclass
class CorollaryResult:
    gap: np.ndarray      # (T, |S|): V^{M, pi_bar}_t - V^M_t
    bound: np.ndarray    # (T,)
    alpha: np.ndarray
    policy: np.ndarray   # pi_bar, (T, |S|)

    @property
    def max_excess(self) -> float:
        return float((self.gap - self.bound[:, None]).max())


def corollary_gap(m: Mdp, ab: Abstraction, kind: str = "linear", lip_mode: str = "exact",
                  moduli=None) -> CorollaryResult:
    """Loss from running the abstract optimal policy through ``phi`` on the true MDP."""
    mt = build_abstract_mdp(m, ab)
    pi_t, Vt = backward_induction(mt)
    pi_bar = pi_t[:, ab.phi]
    _, V = backward_induction(m)
    Vbar = evaluate_markov_policy(m, pi_bar)
    Fc, FP = moduli if moduli is not None else fit_moduli(m, ab, kind)
    lipV = abstract_lipschitz(mt, Vt, lip_mode)
    core = theorem_bound(np.zeros(m.T), Fc, FP, lipV)
    return CorollaryResult(Vbar[:m.T] - V[:m.T], core.bound, core.alpha, pi_bar)


@dataclass
class AisResult:
    ap1: list           # per step: (N_t, |A|) residuals
    ap1_ceiling: np.ndarray
    ap2: list           # per step t <= T-1: (N_t, |A|) residuals
    ap2_ceiling: np.ndarray

    @property
    def ap1_excess(self) -> float:
        return max(float((r - c).max(initial=-np.inf)) for r, c in zip(self.ap1, self.ap1_ceiling))

    @property
    def ap2_excess(self) -> float:
        if not self.ap2:
            return -np.inf
        return max(float((r - c).max(initial=-np.inf)) for r, c in zip(self.ap2, self.ap2_ceiling))


def ais_residuals(p: Pomdp, ab: Abstraction, g: Estimator, kind: str = "linear",
                  moduli=None, tree: HistoryTree | None = None, budget: int | None = None,
                  eta: EtaResult | None = None) -> AisResult:
    """Cost-prediction (AP1) and self-prediction (AP2) residuals on every ``(h_t, a_t)``."""
    m = p.mdp()
    mt = build_abstract_mdp(m, ab)
    Fc, FP = moduli if moduli is not None else fit_moduli(m, ab, kind)
    tree = tree or HistoryTree.build(p, budget=budget)
    eta = eta or compute_eta(p, ab, g, tree)
    T, na, k = p.T, p.n_actions, len(ab.target)
    ap1, ap2 = [], []
    for t in range(1, T + 1):
        est = eta.estimates[t - 1]
        ap1.append(np.abs(tree.expected_costs(t) - mt.c[t - 1][est]))
    for t in range(1, T):
        lv = tree.levels[t - 1]
        nxt = tree.levels[t]
        nxt_est = eta.estimates[t]
        # psi_hat[node, a, k]: law of g_{t+1}(H_{t+1}) given (h_t, a_t)
        psi = np.zeros((len(lv.histories), na, k))
        np.add.at(psi, (nxt.parent, nxt.action, nxt_est), nxt.cond)
        pred = mt.P[t - 1][eta.estimates[t - 1]]  # (N, |A|, k)
        res = np.zeros((len(lv.histories), na))
        d = ab.target.dist
        for i in range(len(lv.histories)):
            for a in range(na):
                res[i, a] = w1(psi[i, a], pred[i, a], d)
        ap2.append(res)
    e = eta.eta
    ap1_c = np.array([Fc[t](e[t]) for t in range(T)])
    ap2_c = np.array([FP[t](e[t]) + e[t + 1] for t in range(T - 1)])
    return AisResult(ap1, ap1_c, ap2, ap2_c)


def abstract_kernel_check(m: Mdp, ab: Abstraction, FP, samples: int | None = None,
                          rng: np.random.Generator | None = None) -> float:
    """Max of ``W1(P^phi(s,a), P~(s~,a)) - FP(d~(phi s, s~))`` over ``(t, s, s~, a)``.

    Exhaustive when ``samples`` is None, otherwise over random tuples.
    """
    mt = build_abstract_mdp(m, ab)
    push = pushforward_all(m, ab)
    d = ab.target.dist
    n, k, na = m.n_states, len(ab.target), m.n_actions
    if samples is None:
        tuples = ((t, s, j, a) for t in range(m.T - 1) for s in range(n)
                  for j in range(k) for a in range(na))
    else:
        rng = rng or np.random.default_rng(0)
        tuples = ((int(rng.integers(m.T - 1)), int(rng.integers(n)), int(rng.integers(k)),
                   int(rng.integers(na))) for _ in range(samples))
    worst = -np.inf
    for t, s, j, a in tuples:
        lhs = w1(push[t, s, a], mt.P[t, j, a], d)
        worst = max(worst, lhs - FP[t](d[ab.phi[s], j]))
    return float(worst)


def explain(report: BoundReport, t: int) -> str:
    """Human-readable additive decomposition of ``alpha_t``."""
    if not 1 <= t <= report.T:
        raise ValueError(f"t = {t} outside 1..{report.T}")
    terms = alpha_terms(report.eps, report.delta, report.lipV.tolist() + [0.0], t)
    total = sum(v for _, v in terms)
    name, val = max(terms, key=lambda kv: kv[1])
    lines = [f"instance {report.instance_id}, t = {t}",
             f"alpha_{t} = {format_float(report.alpha[t - 1])}"]
    for n, v in terms:
        lines.append(f"  {n:<24} {format_float(v)}")
    lines.append(f"  {'sum of terms':<24} {format_float(total)}")
    lines.append(f"dominant term: {name} ({format_float(val)})")
    lines.append(f"bound 2*alpha_{t} = {format_float(report.bound[t - 1])}, "
                 f"measured gap = {format_float(report.gap[t - 1])}")
    return "\n".join(lines)
