import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmdqsim.rl import (
    Experience,
    LearnParams,
    QTable,
    delay_state,
    epsilon_at,
    epsilon_greedy,
    q_update,
    reward_sigmoid,
)


def test_update_half_alpha():
    t = QTable(2, 2)
    assert q_update(t, Experience(0, 1, 1.0, 1), LearnParams(alpha=0.5, gamma=0.9)) == 0.5
    assert t[0, 1] == 0.5


def test_update_zero_alpha_is_noop():
    t = QTable(2, 3)
    t.values[:] = np.arange(6).reshape(2, 3)
    before = t.values.copy()
    q_update(t, Experience(1, 2, 7.0, 0), LearnParams(alpha=0.0, gamma=0.9))
    assert np.array_equal(t.values, before)


def test_update_memoryless_limit():
    t = QTable(2, 2)
    t.values[:] = 3.0
    q_update(t, Experience(0, 0, 0.123, 1), LearnParams(alpha=1.0, gamma=0.0))
    assert t[0, 0] == 0.123


@given(
    st.integers(0, 2), st.integers(0, 3), st.integers(0, 2),
    st.floats(-5, 5), st.floats(0, 1), st.floats(0, 0.99),
)
def test_update_touches_one_entry(s, a, s2, rc, alpha, gamma):
    t = QTable(3, 4)
    t.values[:] = np.random.default_rng(0).normal(size=(3, 4))
    before = t.values.copy()
    q_update(t, Experience(s, a, rc, s2), LearnParams(alpha=alpha, gamma=gamma))
    changed = before != t.values
    changed[s, a] = False
    assert not changed.any()
    assert np.isfinite(t.values).all()


def test_learn_params_validation():
    with pytest.raises(ValueError):
        LearnParams(alpha=1.5)
    with pytest.raises(ValueError):
        LearnParams(gamma=1.0)
    with pytest.raises(ValueError):
        LearnParams(epsilon=-0.1)


def test_greedy_examples():
    rng = np.random.default_rng(0)
    assert epsilon_greedy([0.1, 0.9, 0.3], 0.0, rng) == 1
    assert epsilon_greedy([1, 1, 0], 0.0, rng) == 0
    with pytest.raises(ValueError):
        epsilon_greedy([], 0.0, rng)


def test_full_exploration_is_uniform():
    rng = np.random.default_rng(4)
    picks = np.array([epsilon_greedy([9, 0, 0, 0], 1.0, rng) for _ in range(100_000)])
    freq = np.bincount(picks, minlength=4) / picks.size
    assert np.all(np.abs(freq - 0.25) < 0.01)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=16), st.floats(1e-3, 1e3))
def test_greedy_argmax_invariance(q, scale):
    rng = np.random.default_rng(0)
    a = epsilon_greedy(q, 0.0, rng)
    assert a == int(np.argmax(q))
    assert epsilon_greedy(np.asarray(q) * scale, 0.0, rng) == a


def test_epsilon_schedule():
    assert epsilon_at(0, 0.9, 0.995, 0.05) == 0.9
    assert epsilon_at(10_000, 0.9, 0.995, 0.05) == 0.05
    assert epsilon_at(100, 0.9, 0.995, 0.05) == pytest.approx(0.9 * 0.995 ** 100)


def test_delay_state():
    assert delay_state(5, 10) == 0
    assert delay_state(10, 10) == 1
    assert delay_state(0, 1e-9) == 0
    with pytest.raises(ValueError):
        delay_state(-1, 10)


def test_reward_examples():
    p = LearnParams(target_delay=10.0, beta=1.0)
    assert reward_sigmoid(10.0, p) == 0.5
    assert reward_sigmoid(0.0, p) == pytest.approx(1 / (1 + math.exp(-10)), abs=1e-12)
    assert reward_sigmoid(1e6, p) < 1e-300 or reward_sigmoid(1e6, p) == 0.0
    with pytest.raises(ValueError):
        reward_sigmoid(-1.0, p)


@given(st.floats(0, 500), st.floats(0, 500))
def test_reward_bounded_and_decreasing(a, b):
    p = LearnParams()
    ra, rb = reward_sigmoid(a, p), reward_sigmoid(b, p)
    if a < 60:
        # below underflow the reward stays strictly inside (0, 1)
        assert 0 < ra < 1
    if a < b and b - a > 1e-6 and b < 60:
        assert ra > rb
    if a <= b:
        assert ra >= rb
