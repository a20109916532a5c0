import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cetool.mdp import backward_induction
from cetool.pomdp import (BudgetExceeded, HistoryTree, UnreachableHistory, evaluate_history_policy,
                          filter as bayes_filter, fully_observed, history_key, optimal_value,
                          parse_history, simulate, uninformative)

from conftest import pomdps, small_pomdp
from oracles import (brute_force_pomdp_root, joint_posterior, open_loop_values,
                     policy_value_by_paths, reachable_by_paths)


@given(pomdps())
def test_tree_is_exactly_the_reachable_set(p):
    tree = HistoryTree.build(p)
    ref = reachable_by_paths(np.asarray(p.xi), np.asarray(p.P), p.T)
    for t in range(1, p.T + 1):
        assert set(tree.levels[t - 1].histories) == ref[t]


@given(pomdps())
def test_beliefs_match_joint_law(p):
    tree = HistoryTree.build(p)
    for lv in tree.levels:
        for h, b in zip(lv.histories, lv.beliefs):
            assert np.allclose(b, joint_posterior(np.asarray(p.xi), np.asarray(p.P), h), atol=1e-12)
            assert np.allclose(b, bayes_filter(p, h), atol=1e-12)


@given(pomdps())
def test_reach_probabilities_sum_per_action_sequence(p):
    tree = HistoryTree.build(p)
    for lv in tree.levels:
        acts: dict = {}
        for h, pr in zip(lv.histories, lv.prob):
            acts[h[1::2]] = acts.get(h[1::2], 0.0) + pr
        assert all(abs(v - 1) < 1e-12 for v in acts.values())


@given(pomdps())
def test_fully_observed_matches_mdp(p):
    q = fully_observed(p)
    W = optimal_value(q)
    _, V = backward_induction(q.mdp())
    for (y,), w in zip(W.tree.levels[0].histories, W.values[0]):
        assert w == pytest.approx(V[0][y], abs=1e-9)


@given(pomdps())
def test_uninformative_matches_open_loop(p):
    q = uninformative(p)
    W = optimal_value(q)
    ref = open_loop_values(np.asarray(q.xi).sum(1), np.asarray(q.P_S), np.asarray(q.c))
    assert W.values[0][0] == pytest.approx(ref, abs=1e-9)


@settings(max_examples=15)
@given(pomdps(max_states=2, max_obs=2, max_actions=2, max_T=2))
def test_optimum_matches_history_policy_enumeration(p):
    W = optimal_value(p)
    tree = W.tree
    root = float(tree.levels[0].prob @ W.values[0])
    assert root == pytest.approx(brute_force_pomdp_root(np.asarray(p.xi), np.asarray(p.P),
                                                        np.asarray(p.c)), abs=1e-9)


@given(pomdps(), st.integers(0, 2**32 - 1))
def test_policy_evaluation_matches_path_enumeration(p, seed):
    def mu(h, b=None):
        return int(np.random.default_rng([seed, *h]).integers(p.n_actions))

    W = evaluate_history_policy(p, mu)
    root = float(W.tree.levels[0].prob @ W.values[0])
    ref = policy_value_by_paths(np.asarray(p.xi), np.asarray(p.P), np.asarray(p.c), mu)
    assert root == pytest.approx(ref, abs=1e-9)


@given(pomdps())
def test_optimum_is_below_any_policy(p):
    W = optimal_value(p)
    E = evaluate_history_policy(p, lambda h, b: 0)
    for w, e in zip(W.values, E.values):
        assert np.all(w <= e + 1e-12)


def test_unreachable_history_rejected():
    p = small_pomdp(3, sparsity=0.6)
    reach = reachable_by_paths(np.asarray(p.xi), np.asarray(p.P), 1)[1]
    missing = [y for y in range(p.n_obs) if (y,) not in reach]
    if missing:
        with pytest.raises(UnreachableHistory):
            bayes_filter(p, (missing[0],))
    tree = HistoryTree.build(p)
    with pytest.raises(UnreachableHistory):
        tree.locate((99,))


def test_budget_exceeded_reports_sizes():
    p = small_pomdp(0, n=3, ny=3, na=2, T=4, sparsity=0.0)
    with pytest.raises(BudgetExceeded) as err:
        HistoryTree.build(p, budget=10)
    assert err.value.budget == 10 and err.value.needed > 10


def test_budget_from_environment(monkeypatch):
    p = small_pomdp(0, n=3, ny=3, na=2, T=4, sparsity=0.0)
    monkeypatch.setenv("CETOOL_BUDGET", "5")
    with pytest.raises(BudgetExceeded):
        HistoryTree.build(p)


def test_history_keys_round_trip():
    assert parse_history(history_key((1, 0, 2))) == (1, 0, 2)


def test_simulation_agrees_with_exact_value(rng):
    p = small_pomdp(7, n=3, ny=2, na=2, T=3)
    W = optimal_value(p)
    mu = W.policy()
    exact = float(W.tree.levels[0].prob @ W.values[0])
    _, _, _, cost = simulate(p, mu, 20_000, rng)
    assert abs(cost.mean() - exact) < 5 * cost.std() / np.sqrt(len(cost)) + 1e-9
