import numpy as np
import pytest

from cetool.abstraction import Abstraction, build_abstract_mdp, pushforward_all
from cetool.mdp import Mdp
from cetool.spaces import MetricSpace, StructureError

from conftest import small_pomdp


def test_identity_reproduces_the_model():
    m = small_pomdp(1).mdp()
    mt = build_abstract_mdp(m, Abstraction.identity(m.space))
    assert np.array_equal(mt.P, m.P) and np.array_equal(mt.c, m.c)


def test_dirac_partition_formulas():
    m = small_pomdp(2, n=4, na=2).mdp()
    ab = Abstraction.from_partition(m.space, [0, 0, 1, 1], [1, 2])
    mt = build_abstract_mdp(m, ab)
    # cost at the representative, pushforward of the representative's kernel
    assert np.allclose(mt.c[:, 0], m.c[:, 1]) and np.allclose(mt.c[:, 1], m.c[:, 2])
    P = np.asarray(m.P)
    assert np.allclose(mt.P[:, 0, :, 0], P[:, 1, :, 0] + P[:, 1, :, 1])
    assert np.allclose(mt.P[:, 1, :, 1], P[:, 2, :, 2] + P[:, 2, :, 3])
    assert ab.target.dist[0, 1] == m.space.dist[1, 2]


def test_uniform_lifting_averages():
    m = small_pomdp(2, n=4, na=2).mdp()
    ab = Abstraction.from_partition(m.space, [0, 1, 0, 1], [0, 1], lifting="uniform")
    mt = build_abstract_mdp(m, ab)
    assert np.allclose(mt.c[:, 0], (m.c[:, 0] + m.c[:, 2]) / 2)


def test_pushforward_rows_are_distributions():
    m = small_pomdp(4, n=4).mdp()
    ab = Abstraction.from_partition(m.space, [0, 1, 1, 2], [0, 1, 3])
    assert np.allclose(pushforward_all(m, ab).sum(-1), 1)


def test_validation():
    sp = MetricSpace.path(3)
    with pytest.raises(StructureError):
        Abstraction.from_partition(sp, [0, 0, 0], [0, 1])
    with pytest.raises(StructureError):
        Abstraction.from_partition(sp, [0, 1, 1], [0, 0])
    lam = np.array([[1.0, 0, 0], [0.5, 0.5, 0]])
    with pytest.raises(StructureError):
        Abstraction(sp, sp.restrict([0, 1]), np.array([0, 1, 1]), lam, lam)


def test_cell_radius():
    ab = Abstraction.from_partition(MetricSpace.path(6), [0, 0, 0, 1, 1, 1], [1, 4])
    assert ab.cell_radius() == 1.0
