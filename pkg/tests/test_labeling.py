import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import nearest_rank

from newspop.labeling import K_GRID, LabelPolicy, fit_threshold, label, label_many


def test_median_of_1_to_100():
    assert fit_threshold(range(1, 101), 0.5).delta == nearest_rank(range(1, 101), 0.5) == 50


def test_eighty_percent_of_1_to_10():
    assert fit_threshold(range(1, 11), 0.8).delta == nearest_rank(range(1, 11), 0.8) == 8


@pytest.mark.parametrize("k", [0.01, 0.5, 0.65, 0.8, 0.99])
def test_constant_list(k):
    assert fit_threshold([7] * 13, k).delta == 7


def test_errors():
    with pytest.raises(ValueError):
        fit_threshold([], 0.5)
    for k in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            fit_threshold([1, 2], k)


def test_decimal_k_is_not_pushed_up_by_float_error():
    # 0.65 * 20 is 13.000000000000002 in floating point; rank 13 must still be chosen
    values = list(range(1, 21))
    assert fit_threshold(values, 0.65).delta == nearest_rank(values, 0.65) == 13


def test_label_boundary():
    pol = LabelPolicy(k=0.5, delta=10)
    assert label(10, pol) == 0
    assert label(11, pol) == 1
    assert label(0, LabelPolicy(0.5, 0)) == 0
    assert label_many([9, 10, 11], pol).tolist() == [0, 0, 1]


def test_random_lists_match_sort_and_scan_oracle():
    rng = random.Random(0)
    for _ in range(300):
        xs = [rng.randrange(50) for _ in range(rng.randrange(1, 60))]
        for k in K_GRID:
            assert fit_threshold(xs, k).delta == nearest_rank(xs, k)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=200), st.floats(0.01, 0.99))
def test_threshold_is_attained_and_meets_k(xs, k):
    delta = fit_threshold(xs, k).delta
    n = len(xs)
    assert delta in xs
    at_most = sum(x <= delta for x in xs)
    below = sum(x < delta for x in xs)
    assert at_most / n >= k - 1e-9
    assert below / n < k + 1e-9


@settings(max_examples=200)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=200))
def test_positive_share_non_increasing_in_k(xs):
    pos = [int(label_many(xs, fit_threshold(xs, k)).sum()) for k in sorted([0.3, *K_GRID, 0.95])]
    assert all(a >= b for a, b in zip(pos, pos[1:]))


@settings(max_examples=100)
@given(st.sets(st.integers(0, 10**6), min_size=1, max_size=300))
def test_distinct_values_split_in_half(values):
    xs = list(values)
    n = len(xs)
    pos = int(label_many(xs, fit_threshold(xs, 0.5)).sum())
    assert pos == n // 2
    if n >= 20:
        assert 0.45 <= pos / n <= 0.55


def test_label_many_matches_label():
    xs = np.random.default_rng(1).integers(0, 30, 100)
    pol = fit_threshold(xs, 0.65)
    assert label_many(xs, pol).tolist() == [label(int(x), pol) for x in xs]
