from collections import Counter
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dagtower import (Dag, DagError, build_layer_dp, count_dags, enumerate_dags, regeneration_points,
                      sample_dag_given_vector, sample_tower_vector, sample_uniform_dag, tower_dag_count,
                      tower_decompose, tower_vector_weight)
from dagtower.tower import Tower, compositions, tower_vector_count, vector_law_from_dp


def test_layered_example_layers(layered_example):
    tower, h = tower_decompose(layered_example)
    assert h == (2, 2, 2, 1)
    assert [set(layer) for layer in tower.layers] == [{4, 6}, {1, 3}, {2, 5}, {7}]
    # 7 -> 4 and 7 -> 3 skip a layer, so they are not tower edges
    assert tower.edges == frozenset({(7, 2), (5, 3), (2, 1), (3, 6), (1, 4), (1, 6)})


def test_trivial_towers():
    chain = Dag.from_edges(4, [(1, 2), (2, 3), (3, 4)])
    assert tower_decompose(chain)[1] == (1, 1, 1, 1)
    assert tower_decompose(Dag(5, (0,) * 5))[1] == (5,)
    with pytest.raises(DagError):
        tower_decompose(Dag(0, ()))


def test_tower_edge_invariants():
    for g in enumerate_dags(4):
        tower, h = tower_decompose(g)
        layer = tower.layer_of()
        for u, v in tower.edges:
            assert layer[u] == layer[v] + 1
        for v, i in layer.items():
            if i >= 2:
                assert any(u == v for u, _ in tower.edges)
            else:
                assert not g.children(v)


def test_tower_dag_count_examples():
    assert tower_dag_count(Tower(2, ((1,), (2,)), frozenset({(2, 1)}))) == 1
    assert tower_dag_count(Tower(3, ((1,), (2,), (3,)), frozenset({(2, 1), (3, 2)}))) == 2


@pytest.mark.parametrize("n", [3, 4, 5])
def test_tower_partition(n):
    groups = Counter()
    towers = {}
    for g in enumerate_dags(n):
        t, _ = tower_decompose(g)
        groups[t.key()] += 1
        towers[t.key()] = t
    for key, size in groups.items():
        assert tower_dag_count(towers[key]) == size
    assert sum(groups.values()) == count_dags(n)


def test_vector_weights_small():
    assert tower_vector_weight((2,), 2) == Fraction(1, 3)
    assert tower_vector_weight((1, 1), 2) == Fraction(2, 3)
    assert tower_vector_weight((1,), 1) == 1
    with pytest.raises(DagError):
        tower_vector_weight((1, 1), 3)


@pytest.mark.parametrize("n", [4, 5])
def test_vector_weight_matches_enumeration(n):
    freq = Counter(tower_decompose(g)[1] for g in enumerate_dags(n))
    for h in compositions(n):
        assert tower_vector_count(h) == freq.get(h, 0)


@pytest.mark.parametrize("n", range(1, 13))
def test_vector_weights_normalize(n):
    assert sum(tower_vector_weight(h, n) for h in compositions(n)) == 1


@pytest.mark.parametrize("n", [1, 2, 5, 9, 12])
def test_exact_dp_law(n):
    law = vector_law_from_dp(build_layer_dp(n, exact=True))
    assert law == {h: tower_vector_weight(h, n) for h in compositions(n)}


def test_dp_base_and_first_layer():
    dp = build_layer_dp(2, exact=True)
    assert all(dp.z(0, p) == 1 for p in range(3))
    assert dp.z(2, 0) == 3
    assert dp.choice_distribution(2, 0) == [Fraction(2, 3), Fraction(1, 3)]


def test_float_dp_matches_exact():
    exact = build_layer_dp(30, exact=True)
    approx = build_layer_dp(30)
    for m, p in [(30, 0), (17, 3), (5, 1), (12, 12)]:
        pe = np.array([float(x) for x in exact.choice_distribution(m, p)])
        np.testing.assert_allclose(approx.choice_distribution(m, p), pe, rtol=1e-9, atol=1e-300)


def test_regeneration_examples():
    assert regeneration_points((2, 1, 2, 3, 1, 1, 2)) == ((2, 5, 6), 3)
    assert regeneration_points((1, 1, 1)) == ((1, 2, 3), 3)
    assert regeneration_points((5,)) == ((), 0)


def test_sampler_small_cases(rng):
    dp1 = build_layer_dp(1)
    assert all(sample_tower_vector(dp1, rng) == (1,) for _ in range(50))
    assert sample_uniform_dag(1, rng) == Dag(1, (0,))
    single = sample_dag_given_vector((1, 1), rng)
    assert single.num_edges == 1
    assert sample_dag_given_vector((2,), rng).num_edges == 0


@pytest.mark.parametrize("exact", [False, True])
def test_n2_vector_frequency(rng, exact):
    dp = build_layer_dp(2, exact=exact)
    draws = 100_000
    hits = sum(sample_tower_vector(dp, rng) == (1, 1) for _ in range(draws))
    sigma = (2 / 9 / draws) ** 0.5
    assert abs(hits / draws - 2 / 3) < 3 * sigma


def test_n6_vector_law_chi_square(rng):
    dp = build_layer_dp(6)
    comps = list(compositions(6))
    counts = Counter(sample_tower_vector(dp, rng) for _ in range(200_000))
    observed = [counts.get(h, 0) for h in comps]
    expected = [float(tower_vector_weight(h, 6)) * 200_000 for h in comps]
    assert len(comps) == 32
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_exact_mode_sampler_large_n(rng):
    dp = build_layer_dp(40, exact=True)
    h = sample_tower_vector(dp, rng)
    assert sum(h) == 40 and min(h) >= 1


vectors = st.lists(st.integers(1, 6), min_size=1, max_size=7)


@settings(max_examples=80)
@given(vectors, st.integers(0, 2**32))
def test_round_trip_vector(h, seed):
    g = sample_dag_given_vector(h, np.random.Generator(np.random.Philox(seed)))
    assert tower_decompose(g)[1] == tuple(h)


def test_label_assignment_uniform(rng):
    # each of the C(4,2) label splits of h=(2,2) equally likely
    counts = Counter()
    for _ in range(12_000):
        t, _ = tower_decompose(sample_dag_given_vector((2, 2), rng))
        counts[t.layers[0]] += 1
    assert len(counts) == comb(4, 2)
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def test_expected_regenerations_exact_small():
    from dagtower.tower import expected_regenerations

    for n in (1, 4, 7):
        want = sum(float(tower_vector_weight(h, n)) * regeneration_points(h)[1] for h in compositions(n))
        assert expected_regenerations(build_layer_dp(n)) == pytest.approx(want, rel=1e-12)
        assert expected_regenerations(build_layer_dp(n, exact=True)) == pytest.approx(want, rel=1e-12)
