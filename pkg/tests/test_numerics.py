import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from darkgate.numerics import compensated_sum


def test_cancellation_is_exact():
    x = np.array([1e16, 1.0, -1e16, 1.0, 3.0])
    assert compensated_sum(x) == 5.0


def test_axis_and_empty():
    a = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(compensated_sum(a, axis=0), a.sum(axis=0))
    np.testing.assert_array_equal(compensated_sum(a, axis=1), a.sum(axis=1))
    assert compensated_sum(np.zeros(0)) == 0.0


def test_complex_components():
    rng = np.random.default_rng(0)
    z = rng.normal(size=1001) * 1e8 + 1j * rng.normal(size=1001)
    z = np.concatenate([z, -z, [1 + 2j]])
    assert compensated_sum(z) == 1 + 2j


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=-1e12, max_value=1e12, allow_nan=False), min_size=1, max_size=300))
def test_matches_exactly_rounded_sum(values):
    exact = math.fsum(values)
    got = compensated_sum(np.array(values))
    scale = math.fsum(abs(v) for v in values)
    assert abs(got - exact) <= 4 * np.finfo(float).eps * abs(exact) + 1e-30 * scale + 2 * np.finfo(float).eps ** 2 * scale
