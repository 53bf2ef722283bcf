import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dagtower import DagError, tower_vector_weight
from dagtower.features import (DivergentTail, TargetUnreachable, assemble_features, conditional_vector_law,
                               enumerate_features_of_size, extract_features, feature_product_law,
                               feature_weight, feature_weight_free_left, feature_weight_free_right,
                               mean_feature_size, partition_function, size_aggregates, solve_theta_star,
                               tail_bound)


def ones(n):
    return (1,) * n


def test_extract_examples():
    split = extract_features((2, 1, 2, 3, 1, 1, 2))
    assert split.features == ((2,), (2, 3), (), (2,))
    assert split.regenerations == 3
    assert extract_features((1, 1, 1)).features == ((), (), (), ())
    free = extract_features((3, 2))
    assert free.free_free and free.features == ((3, 2),)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=12))
def test_reassembly(h):
    split = extract_features(h)
    assert assemble_features(split) == tuple(h)
    assert all(x >= 2 for f in split.features for x in f)
    assert len(split.features) == split.regenerations + 1 or split.free_free


def test_enumerate_features():
    assert list(enumerate_features_of_size(0)) == [()]
    assert set(enumerate_features_of_size(4)) == {(4,), (2, 2)}
    assert set(enumerate_features_of_size(6)) == {(6,), (4, 2), (2, 4), (3, 3), (2, 2, 2)}
    assert list(enumerate_features_of_size(1)) == []
    # compositions into parts >= 2 follow the shifted Fibonacci numbers
    assert [sum(1 for _ in enumerate_features_of_size(k)) for k in range(2, 10)] == [1, 1, 2, 3, 5, 8, 13, 21]


def test_empty_weights():
    assert feature_weight(()) == feature_weight_free_left(()) == feature_weight_free_right(()) == 1
    with pytest.raises(DagError):
        feature_weight((1, 2))


def test_wired_weight_of_two():
    assert feature_weight((2,)) == Fraction(3, 8)
    assert feature_weight((2,)) == tower_vector_weight((1, 2, 1), 4) / tower_vector_weight(ones(4), 4)


@pytest.mark.parametrize("k", range(2, 9))
def test_weights_are_tower_weight_ratios(k):
    # a feature between two single-site layers, against the all-ones tower of equal size
    for g in enumerate_features_of_size(k):
        n = k + 2
        assert feature_weight(g) == tower_vector_weight((1,) + g + (1,), n) / tower_vector_weight(ones(n), n)
        n = k + 1
        base = tower_vector_weight(ones(n), n)
        assert feature_weight_free_left(g) == tower_vector_weight(g + (1,), n) / base
        assert feature_weight_free_right(g) == tower_vector_weight((1,) + g, n) / base


def test_free_left_bound():
    for k in range(2, 9):
        for g in enumerate_features_of_size(k):
            assert feature_weight_free_left(g) <= 2 ** g[0] * feature_weight(g)


def test_size_aggregates_match_enumeration():
    table = size_aggregates(14)
    for k in range(15):
        assert table[k] == sum((feature_weight(g) for g in enumerate_features_of_size(k)), Fraction(0))


def test_aggregate_bound():
    table = size_aggregates(20)
    assert all(table[k] <= 8 * Fraction(3, 4) ** k for k in range(2, 21))


def test_partition_function_certified():
    ens = partition_function(0.0, 1e-12)
    assert ens.z_tail_bound < 1e-12
    assert ens.z >= 1
    assert ens.z == pytest.approx(2.22938, abs=1e-5)
    # the truncated sum is exactly the float of the exact head
    head = sum(size_aggregates(min(ens.truncation, 60)))
    if ens.truncation <= 60:
        assert ens.z == pytest.approx(float(head), rel=1e-14)


def test_partition_function_monotone_and_limit():
    zs = [partition_function(t).z for t in (0, 0.5, 1, 2)]
    assert all(a > b for a, b in zip(zs, zs[1:]))
    assert partition_function(40.0).z == pytest.approx(1.0, abs=1e-15)
    means = [mean_feature_size(t) for t in (-0.2, 0, 0.3, 1, 2, 5)]
    assert all(a > b for a, b in zip(means, means[1:]))
    assert mean_feature_size(40.0) < 1e-15


def test_divergent_tilt_refused():
    with pytest.raises(DivergentTail):
        partition_function(math.log(0.75) - 0.01)
    with pytest.raises(DivergentTail):
        tail_bound(-1.0, 10)


def test_tail_bound_dominates_series():
    q = 0.75 * math.exp(-0.3)
    direct = math.fsum(8 * q ** j for j in range(11, 4000))
    assert direct <= tail_bound(0.3, 10)
    direct1 = math.fsum(j * 8 * q ** j for j in range(11, 4000))
    assert direct1 <= tail_bound(0.3, 10, 1)


@pytest.mark.parametrize("c1", [0.2, 0.4, 0.55, 0.9])
def test_theta_star(c1):
    sol = solve_theta_star(c1, 1e-8)
    target = (1 - c1) / c1
    assert sol.residual < 1e-8
    assert mean_feature_size(sol.theta - 1e-4, 1e-14) > target > mean_feature_size(sol.theta + 1e-4, 1e-14)
    assert sol.bracket[0] <= sol.theta <= sol.bracket[1]


def test_theta_star_fixed_point():
    c1 = 1 / (1 + mean_feature_size(0.0, 1e-14))
    assert abs(solve_theta_star(c1, 1e-8).theta) < 1e-6


def test_theta_star_errors():
    with pytest.raises(DagError):
        solve_theta_star(1.5)
    with pytest.raises(TargetUnreachable):
        solve_theta_star(1e-4)


@pytest.mark.parametrize("n", range(1, 11))
def test_conditional_law_equals_feature_product(n):
    for r in range(1, n + 1):
        target = conditional_vector_law(n, r)
        for theta in (0.0, 0.5):
            assert feature_product_law(n, r, theta) == target


def test_float_aggregates_match_exact():
    from dagtower.features import _float_sizes

    exact = size_aggregates(60)
    approx = _float_sizes.__wrapped__(90)
    for k in range(2, 61):
        assert approx[k] == pytest.approx(float(exact[k]), rel=1e-12)
