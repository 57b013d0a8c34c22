import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhse.distance import STAT_NAMES, distance_sequence, distribution_stats, histogram_stats
from dhse.features import extract_all
from dhse.graph import Graph, extract_ego_net

from oracles import two_pass_stats

hops = st.lists(st.integers(min_value=1, max_value=6), max_size=40)


def test_sequence_examples():
    p3 = Graph.from_edges([0, 1], [1, 2])
    assert sorted(distance_sequence(extract_ego_net(p3, 0, 2)).tolist()) == [1, 2]
    iso = Graph.from_edges([0], [1], 3)
    assert distance_sequence(extract_ego_net(iso, 2, 2)).size == 0
    star = Graph.from_edges([0, 0, 0], [1, 2, 3])
    assert distance_sequence(extract_ego_net(star, 0, 1)).tolist() == [1, 1, 1]


def test_stats_examples():
    assert distribution_stats([1, 1, 2, 2]).tolist() == [2, 1, 1.5, 1.5, 0.5, -2.0, 0.0]
    assert distribution_stats([1, 1, 1]).tolist() == [1, 1, 1, 1, 0, 0, 0]
    assert distribution_stats([]).tolist() == [0.0] * len(STAT_NAMES)


def test_odd_length_median_and_skew_sign():
    s = distribution_stats([1, 1, 1, 2, 3])
    assert s[2] == 1.0
    assert s[6] > 0


@pytest.mark.parametrize("seed", range(50))
def test_matches_two_pass(seed):
    rng = np.random.default_rng(seed)
    seq = rng.integers(1, 6, size=int(rng.integers(0, 60)))
    np.testing.assert_allclose(distribution_stats(seq), two_pass_stats(seq), rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(hops, st.randoms(use_true_random=False))
def test_permutation_invariance(seq, rnd):
    shuffled = list(seq)
    rnd.shuffle(shuffled)
    np.testing.assert_array_equal(distribution_stats(seq), distribution_stats(shuffled))


@settings(max_examples=200, deadline=None)
@given(hops, st.integers(min_value=-5, max_value=5))
def test_translation(seq, c):
    base = distribution_stats(seq)
    moved = distribution_stats([x + c for x in seq])
    if not seq:
        return
    np.testing.assert_allclose(moved[:4], base[:4] + c, atol=1e-12)
    np.testing.assert_allclose(moved[4:], base[4:], atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(hops)
def test_ordering_invariants(seq):
    mx, mn, med, mean, std, _, _ = distribution_stats(seq)
    assert mn <= med <= mx and mn <= mean <= mx and std >= 0


def test_histogram_stats_rows_independent():
    rng = np.random.default_rng(1)
    counts = rng.integers(0, 5, size=(30, 4))
    counts[0] = 0
    out = histogram_stats(np.arange(1, 5), counts)
    for row, cnt in zip(out, counts):
        seq = np.repeat(np.arange(1, 5), cnt)
        np.testing.assert_allclose(row, two_pass_stats(seq), atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_bulk_distance_block_matches_per_node(seed):
    rng = np.random.default_rng(seed)
    n = 40
    g = Graph.from_edges(rng.integers(0, n, 70), rng.integers(0, n, 70), n)
    for k in (1, 2, 3):
        _, dist = extract_all(g, k)
        for v in range(n):
            expect = distribution_stats(distance_sequence(extract_ego_net(g, v, k)))
            np.testing.assert_allclose(dist[v], expect, atol=1e-12)
