import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carpetdim import (MalformedSpec, composition_bounds, cylinder_interval,
                       format_full_word, parse_full_word, parse_row_word,
                       tail_coordinate)


def test_tail_coordinate_fixed_points(S1):
    # fixed point of b_1(y) = 0.45 y is 0, of b_2(y) = 0.55 + 0.45 y is 1
    assert tail_coordinate(S1, (1,)).z == pytest.approx(0.0, abs=1e-12)
    assert tail_coordinate(S1, (2,)).z == pytest.approx(1.0, abs=1e-12)
    # period-2 word 12 repeated: fixed point of b_1 o b_2
    z = tail_coordinate(S1, (1, 2)).z
    assert z == pytest.approx(0.45 * (0.55 + 0.45 * z), abs=1e-11)


def test_tail_coordinate_error_bound(S1eps):
    tc = tail_coordinate(S1eps, (1, 2, 1), tol=1e-10)
    assert tc.error_bound <= 1e-10
    finer = tail_coordinate(S1eps, (1, 2, 1), tol=1e-14)
    assert abs(tc.z - finer.z) <= tc.error_bound + finer.error_bound


def test_tail_coordinate_rejects_empty(S1):
    with pytest.raises(MalformedSpec):
        tail_coordinate(S1, ())


def test_composition_bounds_s1(S1):
    a, b = composition_bounds(S1, ((1, 1), (2, 2)))
    assert a == pytest.approx(0.04, abs=1e-12)   # 0.2^2, constants: no slack
    assert b == pytest.approx(0.2025, abs=1e-12)  # 0.45^2


def test_composition_bounds_upper(S1eps):
    # certified upper bound dominates the grid max of the true product
    a, b = composition_bounds(S1eps, ((1, 1), (2, 1), (1, 3)))
    assert a <= 0.21 ** 3 * 1.05  # crude slope cap cubed, rough sanity
    assert b == pytest.approx(0.45 ** 3, abs=1e-9)


def test_cylinder_interval_nesting(S1eps):
    lo1, hi1 = cylinder_interval(S1eps, (1,))
    lo2, hi2 = cylinder_interval(S1eps, (1, 2))
    assert lo1 <= lo2 < hi2 <= hi1
    lo, hi = cylinder_interval(S1eps, (2,))
    assert hi1 < lo  # (H2) disjointness of row images


def test_word_serialization():
    w = parse_full_word("1.1 2.2 1.3")
    assert w == ((1, 1), (2, 2), (1, 3))
    assert format_full_word(w) == "1.1 2.2 1.3"
    assert parse_row_word("1 2 1") == (1, 2, 1)
    with pytest.raises(MalformedSpec):
        parse_full_word("1,1")
    with pytest.raises(MalformedSpec):
        parse_full_word("")


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 2), min_size=1, max_size=6))
def test_cylinder_nesting_property(S1, word):
    """Appending a letter shrinks the cylinder interval."""
    word = tuple(word)
    lo, hi = cylinder_interval(S1, word)
    for i in (1, 2):
        lo2, hi2 = cylinder_interval(S1, word + (i,))
        assert lo - 1e-15 <= lo2 < hi2 <= hi + 1e-15
