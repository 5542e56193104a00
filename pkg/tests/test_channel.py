import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from dmdqsim.channel import LinkBudget, path_loss_db, rb_bits, sinr_linear

BUDGET = LinkBudget(pl0=30.0, exponent=3.0, ref_distance=1.0)


def test_reference_point():
    assert path_loss_db(1.0, BUDGET) == 30.0


def test_ten_metres():
    assert path_loss_db(10.0, BUDGET) == pytest.approx(60.0, abs=1e-12)


def test_below_reference_is_clamped():
    assert path_loss_db(0.5, BUDGET) == 30.0


def test_budget_validation():
    with pytest.raises(ValueError):
        LinkBudget(exponent=0.0)
    with pytest.raises(ValueError):
        LinkBudget(ref_distance=-1.0)
    with pytest.raises(ValueError):
        path_loss_db(0.0, BUDGET)


def test_sinr_examples():
    assert sinr_linear(1.0, [], 0.001) == pytest.approx(1000.0)
    assert sinr_linear(1.0, [1.0], 1e-9) == pytest.approx(1.0, rel=1e-8)
    assert sinr_linear(0.0, [0.3], 0.1) == 0.0
    with pytest.raises(ValueError):
        sinr_linear(1.0, [], 0.0)


def test_rb_bits_examples():
    assert rb_bits(0.0) == 0
    assert rb_bits(1.0, 180e3, 1e-3, 6.0) == 180
    assert rb_bits(1e9, 180e3, 1e-3, 6.0) == 1080


pos = st.floats(1e-3, 1e4, allow_nan=False)
power = st.floats(0.0, 1e3, allow_nan=False)


@given(pos, pos)
def test_path_loss_monotone(a, b):
    lo, hi = sorted((a, b))
    assert path_loss_db(lo, BUDGET) <= path_loss_db(hi, BUDGET)


@given(power, st.lists(power, max_size=4), power, st.floats(1e-6, 1.0))
def test_sinr_decreasing_in_interference_and_noise(target, others, extra, noise):
    base = sinr_linear(target, others, noise)
    assert sinr_linear(target, others + [extra], noise) <= base
    assert sinr_linear(target, others, noise * 2) <= base


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_rb_bits_monotone(a, b):
    lo, hi = sorted((a, b))
    assert rb_bits(lo) <= rb_bits(hi)


@given(power, st.lists(power, max_size=3), power, st.floats(1e-9, 1.0))
def test_extra_interferer_never_adds_bits(target, others, extra, noise):
    assume(target > 0)
    assert rb_bits(sinr_linear(target, others + [extra], noise)) <= rb_bits(sinr_linear(target, others, noise))
