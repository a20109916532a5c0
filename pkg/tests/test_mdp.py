import numpy as np
import pytest
from hypothesis import given, strategies as st

from cetool.mdp import (Mdp, backward_induction, evaluate_markov_policy, lipschitz_constants,
                        lipschitz_of, recursive_lipschitz_bound)
from cetool.spaces import MetricSpace, StructureError

from conftest import pomdps
from oracles import brute_force_mdp, markov_policy_values


@given(pomdps(max_states=3, max_actions=2, max_T=3))
def test_backward_induction_matches_enumeration(p):
    m = p.mdp()
    pi, V = backward_induction(m)
    best, _ = brute_force_mdp(np.asarray(m.c), np.asarray(m.P))
    assert np.allclose(V[0], best, atol=1e-9)
    assert np.allclose(markov_policy_values(np.asarray(m.c), np.asarray(m.P), pi[None])[0], V[0])


def test_ties_go_to_lowest_action():
    m = Mdp(MetricSpace.discrete(2), np.empty(0), np.zeros((1, 2, 3)))
    pi, V = backward_induction(m)
    assert np.all(pi == 0) and np.all(V == 0)


def test_evaluate_rejects_bad_policies():
    m = Mdp(MetricSpace.discrete(2), np.empty(0), np.zeros((1, 2, 2)))
    with pytest.raises(StructureError):
        evaluate_markov_policy(m, np.zeros((2, 2), dtype=int))
    with pytest.raises(StructureError):
        evaluate_markov_policy(m, np.full((1, 2), 2))


def test_lipschitz_of_known_values():
    sp = MetricSpace.path(3, 2.0)
    assert lipschitz_of([0.0, 1.0, 5.0], sp) == 2.0
    assert lipschitz_of([7.0], MetricSpace.discrete(1)) == 0.0


@given(pomdps(max_states=4, max_actions=2, max_T=4))
def test_recursion_dominates_exact_lipschitz(p):
    m = p.mdp()
    _, V = backward_induction(m)
    rec = recursive_lipschitz_bound(m)
    for t in range(m.T):
        assert lipschitz_of(V[t], m.space) <= rec[t] + 1e-9


def test_lipschitz_constants_linear_cost():
    sp = MetricSpace.path(4)
    c = np.broadcast_to(2.5 * np.arange(4.0)[:, None], (2, 4, 2))
    P = np.broadcast_to(np.eye(4)[:, None, :], (1, 4, 2, 4))
    Lc, LP = lipschitz_constants(Mdp(sp, P, c))
    assert np.allclose(Lc, 2.5) and np.allclose(LP, 1.0)
