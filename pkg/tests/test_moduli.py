import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cetool.abstraction import Abstraction
from cetool.mdp import Mdp
from cetool.moduli import (Modulus, ModulusError, check_dominates, cost_scatter, fit_envelope,
                           fit_linear, fit_moduli)
from cetool.spaces import MetricSpace

from conftest import instances


def test_constant_cost_gives_zero():
    sp = MetricSpace.path(4)
    m = Mdp(sp, np.broadcast_to(np.full((4, 2, 4), 0.25), (1, 4, 2, 4)), np.ones((2, 4, 2)))
    Fc, FP = fit_moduli(m, Abstraction.identity(sp))
    assert all(F(5.0) == 0 for F in Fc + FP)


def test_known_max_ratio():
    sp = MetricSpace.path(3)
    c = np.array([[[0.0, 0.0], [2.5, 1.0], [3.0, 5.0]]])
    Fc, _ = fit_moduli(Mdp(sp, np.empty(0), c), Abstraction.identity(sp))
    # pairs: (0,1) ratio 2.5; (0,2) 5/2; (1,2) 4/1
    assert Fc[0].slopes()[-1] == pytest.approx(4.0)
    c2 = np.array([[[0.0], [2.5], [4.0]]])
    Fc2, _ = fit_moduli(Mdp(sp, np.empty(0), c2), Abstraction.identity(sp))
    assert Fc2[0].slopes()[-1] == pytest.approx(2.5) and Fc2[0].offset == 0


def test_same_cell_pairs_become_offset():
    sp = MetricSpace.path(4)
    c = np.array([[[0.0], [0.3], [1.0], [1.1]]])
    ab = Abstraction.from_partition(sp, [0, 0, 1, 1], [0, 2])
    Fc, _ = fit_moduli(Mdp(sp, np.empty(0), c), ab)
    assert Fc[0].offset == pytest.approx(0.3)


def test_single_cell_envelope_is_constant():
    F = fit_envelope(np.zeros(3), np.array([0.1, 0.4, 0.2]))
    assert F(0.0) == F(10.0) == pytest.approx(0.4)


def test_modulus_validation():
    with pytest.raises(ValueError):
        Modulus((0.0, 1.0), (0.0, 2.0), 3.0)      # convex kink
    with pytest.raises(ValueError):
        Modulus((0.0, 1.0), (1.0, 0.5), 0.0)      # decreasing
    F = Modulus((0.0, 1.0, 3.0), (0.5, 1.5, 2.0), 0.1)
    assert F(2.0) == pytest.approx(1.75) and F(4.0) == pytest.approx(2.1)
    assert Modulus.from_dict(F.to_dict()) == F


def test_check_dominates_raises():
    with pytest.raises(ModulusError):
        check_dominates(Modulus.linear(1.0), np.array([1.0]), np.array([2.0]))


scatter = st.integers(1, 25).flatmap(lambda n: st.tuples(
    arrays(float, n, elements=st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 3.5])),
    arrays(float, n, elements=st.floats(0, 10))))


@given(scatter)
def test_envelope_is_tightest_valid_fit(data):
    x, gap = data
    env, lin = fit_envelope(x, gap), fit_linear(x, gap)
    check_dominates(env, x, gap)
    check_dominates(lin, x, gap)
    grid = np.linspace(0, 5, 41)
    assert np.all(env(grid) <= lin(grid) + 1e-9)
    # least majorant: touches the data at every hull breakpoint
    for bx, by in zip(env.xs, env.ys):
        at = gap[np.isclose(x, bx)] if bx > 0 else np.r_[gap[x <= 0], 0.0]
        assert by == pytest.approx(at.max())


@given(instances())
def test_fitted_moduli_satisfy_smoothness(inst):
    m = inst.pomdp.mdp()
    for kind in ("linear", "envelope"):
        Fc, FP = fit_moduli(m, inst.abstraction, kind)
        for F, (x, gap) in zip(Fc, cost_scatter(m, inst.abstraction)):
            assert np.all(gap <= F(x) + 1e-9)
