import numpy as np
import pytest
from hypothesis import settings, strategies as st

from cetool.scenarios import RandomConfig, random_instance, random_model

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def small_pomdp(seed, n=3, ny=2, na=2, T=3, sparsity=0.3):
    return random_model(RandomConfig(n, ny, na, T, seed, sparsity=sparsity))


@st.composite
def pomdps(draw, max_states=3, max_obs=3, max_actions=2, max_T=3):
    cfg = RandomConfig(
        n_states=draw(st.integers(1, max_states)),
        n_obs=draw(st.integers(1, max_obs)),
        n_actions=draw(st.integers(1, max_actions)),
        T=draw(st.integers(1, max_T)),
        seed=draw(st.integers(0, 10_000)),
        sparsity=draw(st.sampled_from([0.0, 0.3, 0.6])),
    )
    return random_model(cfg)


@st.composite
def instances(draw, variants=None):
    from cetool.scenarios import VARIANTS
    cfg = RandomConfig(
        n_states=draw(st.integers(1, 4)),
        n_obs=draw(st.integers(1, 3)),
        n_actions=draw(st.integers(1, 3)),
        T=draw(st.integers(1, 3)),
        seed=draw(st.integers(0, 10_000)),
        variant=draw(st.sampled_from(variants or VARIANTS)),
    )
    return random_instance(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
