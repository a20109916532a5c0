import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cetool import estimators as est
from cetool.abstraction import Abstraction, build_abstract_mdp
from cetool.bounds import (BoundReport, BoundViolation, ais_residuals, alpha_terms, ce_policy,
                           compute_eta, corollary_gap, explain, abstract_kernel_check, reports_to_csv, solve,
                           theorem_bound, verify_theorem)
from cetool.mdp import Mdp, backward_induction
from cetool.moduli import Modulus, fit_moduli
from cetool.pomdp import Pomdp, fully_observed
from cetool.spaces import MetricSpace, StructureError

from conftest import instances, small_pomdp


def two_state(acc=0.8, T=2):
    """Static two-state system observed through a symmetric channel."""
    sp = MetricSpace.discrete(2)
    O = np.array([[acc, 1 - acc], [1 - acc, acc]])
    xi = 0.5 * O
    P = np.broadcast_to(np.eye(2)[None, :, None, :, None] * O[None, None, None, :, :], (T - 1, 2, 1, 2, 2))
    c = np.broadcast_to(np.array([[0.0], [1.0]]), (T, 2, 1))
    return Pomdp(sp, xi, P, c)


def test_eta_by_hand():
    p = two_state()
    r = compute_eta(p, Abstraction.identity(p.space), est.last_observation([0, 1]))
    # t = 1: P(s != y | y) = 0.2; t = 2, y = (0, 1): posterior is even, error 1/2
    assert r.eta == pytest.approx([0.2, 0.5], abs=1e-12)
    assert r.worst[1][0] != r.worst[1][2]


def test_eta_zero_with_perfect_estimator():
    p = fully_observed(small_pomdp(5))
    g = est.last_observation(np.arange(p.n_states))
    assert np.all(compute_eta(p, Abstraction.identity(p.space), g).eta == 0)


def test_estimator_out_of_range():
    p = small_pomdp(5)
    with pytest.raises(StructureError):
        compute_eta(p, Abstraction.identity(p.space), est.last_observation([7] * p.n_obs))


def test_theorem_bound_zero_error():
    core = theorem_bound([0, 0, 0], [Modulus.linear(2)] * 3, [Modulus.linear(3)] * 2, [5, 4, 1, 0])
    assert np.all(core.bound == 0)
    assert np.isnan(core.delta[-1])


def test_theorem_bound_closed_form():
    eta = np.array([0.5, 0.25, 1.0])
    Fc = [Modulus.linear(1.0), Modulus.linear(2.0), Modulus.linear(0.5)]
    FP = [Modulus.linear(3.0, 0.1), Modulus.linear(1.0)]
    lip = [9.0, 2.0, 4.0, 0.0]
    core = theorem_bound(eta, Fc, FP, lip)
    eps = [0.5, 0.5, 0.5]
    delta = [3 * 0.5 + 0.1 + 0.25, 0.25 + 1.0]
    a3 = eps[2]
    a2 = eps[1] + delta[1] * lip[2] + eps[2]
    a1 = eps[0] + delta[0] * lip[1] + eps[1] + delta[1] * lip[2] + eps[2]
    assert core.alpha == pytest.approx([a1, a2, a3])
    assert core.bound == pytest.approx(2 * np.array([a1, a2, a3]))


def test_negative_eta_rejected():
    with pytest.raises(StructureError):
        theorem_bound([-0.1], [Modulus.zero()], [], [0, 0])


@given(st.lists(st.floats(0, 3), min_size=1, max_size=5), st.integers(0, 2**32 - 1))
def test_bound_monotone_in_eta(eta, seed):
    rng = np.random.default_rng(seed)
    T = len(eta)
    Fc = [Modulus.linear(rng.uniform(0, 2), rng.uniform(0, 1)) for _ in range(T)]
    FP = [Modulus((0.0, 1.0), (0.2, 1.0), 0.3) for _ in range(T - 1)]
    lip = np.r_[rng.uniform(0, 3, T), 0]
    bigger = np.asarray(eta) + rng.uniform(0, 1, T)
    assert np.all(theorem_bound(eta, Fc, FP, lip).bound
                  <= theorem_bound(bigger, Fc, FP, lip).bound + 1e-12)


def test_ce_policy_acts_on_the_estimate():
    pi = np.array([[1, 0], [0, 1]])
    mu = ce_policy(pi, est.last_observation([1, 0]))
    assert mu((0,)) == 0 and mu((0, 1, 1)) == 0 and mu((1, 0, 0)) == 1


def test_perfect_information_gives_zero_gap():
    p = fully_observed(small_pomdp(11, n=4, na=3))
    ab = Abstraction.identity(p.space)
    rep = verify_theorem(p, ab, est.last_observation(np.arange(4)))
    assert np.all(rep.bound == 0) and np.all(np.abs(rep.gap) <= 1e-9)


@given(instances())
def test_bound_dominates_gap(inst):
    rep = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator)
    assert rep.passed and np.all(rep.slack >= -1e-9)


@given(instances())
def test_envelope_never_loosens_the_bound(inst):
    lin = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator, kind="linear")
    env = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator, kind="envelope")
    assert np.all(env.bound <= lin.bound + 1e-9)


@given(instances(), st.sampled_from([0.5, 3.0]))
def test_cost_scaling(inst, k):
    p, ab, g = inst.pomdp, inst.abstraction, inst.estimator
    g2 = g
    if g.pomdp is not None:
        # rebuild belief-based estimators against the scaled model (same beliefs)
        g2 = est.Estimator(g.name, g.rule, p.scaled(k), g.needs_belief)
    a = solve(p, ab, g)
    b = solve(p.scaled(k), ab, g2)
    assert np.array_equal(a.pi, b.pi)
    ra = verify_theorem(p, ab, g, solution=a)
    rb = verify_theorem(p.scaled(k), ab, g2, solution=b)
    assert rb.gap == pytest.approx(k * ra.gap, abs=1e-9)
    assert rb.bound == pytest.approx(k * ra.bound, rel=1e-9, abs=1e-9)


def test_violation_is_a_hard_failure():
    p = two_state()
    p = Pomdp(p.space, p.xi, np.broadcast_to(p.P, (1,) + p.P.shape[1:]).repeat(2, axis=2) / 1.0,
              np.concatenate([p.c, 1 - p.c], axis=2))
    ab = Abstraction.identity(p.space)
    g = est.last_observation([1, 0])            # deliberately wrong
    zero = ([Modulus.zero()] * p.T, [Modulus.zero()] * (p.T - 1))
    with pytest.raises(BoundViolation) as err:
        verify_theorem(p, ab, g, moduli=zero)
    assert err.value.gap > err.value.bound
    rep = verify_theorem(p, ab, g, moduli=zero, strict=False)
    assert rep.violations and not rep.passed


def test_corollary_identity_and_constant_cost():
    m = small_pomdp(3, n=4).mdp()
    assert np.all(np.abs(corollary_gap(m, Abstraction.identity(m.space)).gap) <= 1e-12)
    flat = Mdp(m.space, m.P, np.ones_like(m.c))
    ab = Abstraction.from_partition(m.space, [0, 0, 1, 1], [0, 3])
    assert np.all(np.abs(corollary_gap(flat, ab).gap) <= 1e-12)


def test_corollary_on_quantized_lipschitz_mdp():
    from cetool.scenarios import grid_world
    sp, P, c, _ = grid_world((8,), 4, 0.3, 0.2)
    m = Mdp(sp, P, c)
    ab = Abstraction.from_partition(sp, np.arange(8) // 3, [1, 4, 6])
    res = corollary_gap(m, ab)
    assert res.max_excess <= 1e-9


@given(instances())
def test_ais_residuals_within_ceilings(inst):
    r = ais_residuals(inst.pomdp, inst.abstraction, inst.estimator)
    assert r.ap1_excess <= 1e-9 and r.ap2_excess <= 1e-9


def test_ais_residuals_vanish_for_perfect_estimator():
    p = fully_observed(small_pomdp(4))
    r = ais_residuals(p, Abstraction.identity(p.space), est.last_observation(np.arange(p.n_states)))
    assert max(x.max() for x in r.ap1) <= 1e-12 and max(x.max() for x in r.ap2) <= 1e-12


def test_ap1_bounded_noise_two_state():
    p = two_state(acc=0.9, T=3)
    ab = Abstraction.identity(p.space)
    g = est.last_observation([0, 1])
    r = ais_residuals(p, ab, g)
    eta = compute_eta(p, ab, g).eta
    # cost is 1-Lipschitz on the 0/1 metric
    for t, res in enumerate(r.ap1):
        assert res.max() <= eta[t] + 1e-12


@given(instances(variants=["partition-dirac-map", "partition-uniform-pmr", "identity-map"]))
def test_abstract_kernel_exhaustive(inst):
    m = inst.pomdp.mdp()
    for kind in ("linear", "envelope"):
        _, FP = fit_moduli(m, inst.abstraction, kind)
        assert abstract_kernel_check(m, inst.abstraction, FP) <= 1e-9


def test_abstract_kernel_sampled_identity():
    m = small_pomdp(9, n=4, T=3).mdp()
    ab = Abstraction.identity(m.space)
    _, FP = fit_moduli(m, ab)
    assert abstract_kernel_check(m, ab, FP, samples=200) <= 1e-9


def test_report_round_trip_and_csv():
    inst_p = small_pomdp(2)
    ab = Abstraction.identity(inst_p.space)
    rep = verify_theorem(inst_p, ab, est.map_posterior(inst_p, ab), instance_id="x")
    back = BoundReport.from_dict(rep.to_dict())
    assert np.allclose(back.bound, rep.bound) and np.isnan(back.delta[-1])
    rows = list(csv.reader(io.StringIO(reports_to_csv([rep]))))
    assert rows[0] == ["instance_id", "t", "eta", "eps", "delta", "lipV", "alpha", "bound", "gap", "slack"]
    assert len(rows) == 1 + inst_p.T and rows[-1][4] == ""
    assert float(rows[1][7]) == rep.bound[0]


def test_explain_terms_sum_to_alpha():
    p = small_pomdp(6, T=4)
    ab = Abstraction.identity(p.space)
    rep = verify_theorem(p, ab, est.map_posterior(p, ab))
    for t in range(1, p.T + 1):
        terms = alpha_terms(rep.eps, rep.delta, list(rep.lipV) + [0.0], t)
        assert sum(v for _, v in terms) == pytest.approx(rep.alpha[t - 1], abs=1e-9)
        assert "dominant term" in explain(rep, t)
    with pytest.raises(ValueError):
        explain(rep, 0)


def test_explain_single_step():
    p = small_pomdp(6, T=1)
    ab = Abstraction.identity(p.space)
    rep = verify_theorem(p, ab, est.map_posterior(p, ab))
    assert alpha_terms(rep.eps, rep.delta, [0.0, 0.0], 1) == [("eps_1", rep.eps[0])]
