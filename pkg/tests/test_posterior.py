import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from plm.dist import WeightDistribution
from plm.match import LlrGraph, build_llr
from plm.model import generate_sparse, generate_unweighted
from plm.posterior import (
    count_matchings_at_distance, derangements, dump_table, excess_weight, exhaustive_posterior, heap_permutations,
    marginal_map, marginals, mass_split, sample_posterior, symmetric_difference,
)

E = WeightDistribution.exponential


def test_heap_order_covers_all_permutations():
    perms = heap_permutations(5)
    assert len({tuple(p) for p in perms}) == 120


def test_excess_weight_examples(llr_instance):
    nan = np.nan
    inst = llr_instance([[1.0, 3.0], [2.0, 1.0]])
    assert excess_weight([], inst) == 0.0
    assert excess_weight(symmetric_difference(inst.planted, inst.planted), inst) == 0.0
    assert excess_weight([(0, 1), (1, 0), (0, 0), (1, 1)], inst) == pytest.approx(3.0, abs=1e-12)
    sparse = llr_instance([[1.0, nan], [2.0, 1.0]])
    assert excess_weight([(0, 1), (1, 0), (0, 0), (1, 1)], sparse) == -math.inf


def test_two_matching_closed_form():
    a, b, c, d = 0.3, -1.2, 0.7, 2.0
    t = exhaustive_posterior(np.array([[a, b], [c, d]]))
    want = math.exp(a + d) / (math.exp(a + d) + math.exp(b + c))
    assert math.exp(t.log_mass_of([0, 1])) == pytest.approx(want, rel=1e-12)


def test_equal_likelihoods_give_uniform():
    t = exhaustive_posterior(np.zeros((4, 4)))
    np.testing.assert_allclose(t.masses(), 1 / 24, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000))
def test_masses_normalised_and_ratios_match_excess(n, seed):
    inst = generate_sparse(n, float(n), E(2.0), E(1.0), seed)
    t = exhaustive_posterior(inst)
    assert abs(t.masses().sum() - 1) < 1e-9
    star = t.log_mass_of(inst.planted)
    for k in range(0, len(t.perms), max(1, len(t.perms) // 30)):
        delta = excess_weight(symmetric_difference(t.perms[k], inst.planted), inst)
        assert math.exp(delta) == pytest.approx(math.exp(t.log_mass[k] - star), rel=1e-9)


def test_marginal_map_examples():
    g = np.array([[0.0, -np.inf], [-np.inf, 0.0]])
    edges, perm = marginal_map(exhaustive_posterior(g))
    assert edges == [(0, 0), (1, 1)] and perm.tolist() == [0, 1]
    t = exhaustive_posterior(np.array([[math.log(0.7), math.log(0.3)], [0.0, 0.0]]))
    assert math.exp(t.log_mass_of([0, 1])) == pytest.approx(0.7)
    assert marginal_map(t)[0] == [(0, 0), (1, 1)]
    tie = exhaustive_posterior(np.zeros((2, 2)))
    assert marginal_map(tie)[0] == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_marginal_rows_sum_to_one():
    inst = generate_sparse(5, 5.0, E(2.0), E(1.0), 3)
    m = marginals(exhaustive_posterior(inst))
    np.testing.assert_allclose(m.sum(axis=0), 1, atol=1e-12)
    np.testing.assert_allclose(m.sum(axis=1), 1, atol=1e-12)


def test_sampler_frequencies():
    t = exhaustive_posterior(np.array([[math.log(0.7), math.log(0.3)], [0.0, 0.0]]))
    draws = sample_posterior(t, np.random.default_rng(0), 100_000)
    f = np.mean(draws[:, 0] == 0)
    assert abs(f - 0.7) < 3 * math.sqrt(0.21 / 100_000)
    single = exhaustive_posterior(np.array([[0.0, -np.inf], [-np.inf, 0.0]]))
    assert sample_posterior(single, np.random.default_rng(1)).tolist() == [0, 1]


def test_sampler_uniform_chi_square():
    t = exhaustive_posterior(np.zeros((3, 3)))
    idx = [t.index_of(p) for p in sample_posterior(t, np.random.default_rng(2), 60_000)]
    assert stats.chisquare(np.bincount(idx, minlength=6)).pvalue > 0.05


def test_mass_split_examples():
    t = exhaustive_posterior(np.zeros((4, 4)))
    truth = np.arange(4)
    assert mass_split(t, truth, 1.5)[0] == pytest.approx(1.0)
    # strict inequality: at δ = 1 the full derangements (error 2) are bad
    assert mass_split(t, truth, 1.0)[1] == pytest.approx(9 / 24)
    assert mass_split(t, truth, 0.5)[0] == pytest.approx(1 / 24)
    assert mass_split(t, truth, 1e-9)[0] == pytest.approx(1 / 24)


def test_derangement_values():
    assert [derangements(k) for k in range(8)] == [1, 0, 1, 2, 9, 44, 265, 1854]


def test_matching_counts_against_enumeration():
    n = 6
    dist = np.bincount([sum(p[i] != i for i in range(n)) for p in itertools.permutations(range(n))], minlength=n + 1)
    assert [count_matchings_at_distance(n, ell) for ell in range(n + 1)] == dist.tolist()
    for m in range(1, 11):
        assert sum(count_matchings_at_distance(m, ell) for ell in range(m + 1)) == math.factorial(m)


def test_dump_table_sorted_descending():
    t = exhaustive_posterior(generate_unweighted(4, 2.0, 0))
    vals = [float(line.split()[-1]) for line in dump_table(t).splitlines()]
    assert vals == sorted(vals, reverse=True)
