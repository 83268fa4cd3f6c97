# pylint: skip-file
"""Tests for exact positive-association checks on finite path universes."""

import math
from fractions import Fraction

import numpy as np
import pytest

import oracles
from frilab.fkg import (
    PathUniverse,
    absence_factorization_exact,
    build_universe,
    covariance,
    exact_expectation,
    fkg_check,
    fkg_check_truncated,
    joint_absence,
    marginal_absence_product,
    monotone_tables,
)
from frilab.fri_process import bond_open_probability
from frilab.lattice import Box, EdgeSet, EmptySetError, canonical_edge, box_edges

EDGE_X = canonical_edge((0, 0, 0), (1, 0, 0))
EDGE_Y = canonical_edge((0, 0, 0), (0, 1, 0))
CHAIN = [
    ((0, 0, 0), (1, 0, 0)),
    ((1, 0, 0), (2, 0, 0)),
    ((2, 0, 0), (3, 0, 0)),
]


@pytest.fixture(scope="module")
def two_vertex_universe():
    return build_universe([(0, 0, 0), (1, 0, 0)], 1, 1.0, 1.0)


@pytest.fixture(scope="module")
def chain_universe():
    return build_universe(CHAIN, 2, 1.0, 1.0)


@pytest.fixture(scope="module")
def single_edge_universe():
    return build_universe([EDGE_X], 4, 1.0, 1.0)


# ---------------------------------------------------------------------------
# universe construction


def test_two_vertex_universe_shape(two_vertex_universe):
    uni = two_vertex_universe
    assert uni.n_paths == 14
    assert uni.n_configs == 2**14
    assert len(uni.edges) == 11
    lengths = sorted(len(p.steps) for p in uni.paths)
    assert lengths == [0, 0] + [1] * 12
    empty_q = 1.0 - math.exp(-3.0 * 0.5)
    step_q = 1.0 - math.exp(-1.0 / 8.0)
    for p, q in zip(uni.paths, uni.q):
        expected = empty_q if len(p.steps) == 0 else step_q
        assert q == pytest.approx(expected, abs=1e-14)


def test_single_step_presence_pin(two_vertex_universe):
    step_qs = {
        float(q)
        for p, q in zip(two_vertex_universe.paths, two_vertex_universe.q)
        if len(p.steps) == 1
    }
    assert len(step_qs) == 1
    assert step_qs.pop() == pytest.approx(0.11750309741540454, abs=1e-14)


def test_edge_region_chain_universe(chain_universe):
    uni = chain_universe
    assert uni.n_paths == 20
    assert set(uni.edges) == {canonical_edge(*e) for e in CHAIN}
    covered = {(x, 0, 0) for x in range(4)}
    for p in uni.paths:
        assert tuple(p.start) in covered
        assert set(p.edges()) <= set(uni.edges)


def test_single_edge_universe_is_ten_paths(single_edge_universe):
    uni = single_edge_universe
    assert uni.n_paths == 10
    assert uni.edges == (EDGE_X,)
    lengths = sorted(len(p.steps) for p in uni.paths)
    assert lengths == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4]


def test_edge_set_region_matches_edge_list(single_edge_universe):
    window = Box((0, 0, 0), 2)
    es = EdgeSet.from_edges(window, [EDGE_X])
    uni = build_universe(es, 4, 1.0, 1.0)
    assert uni.n_paths == single_edge_universe.n_paths
    assert uni.edges == single_edge_universe.edges


def test_box_region_uses_all_vertices():
    uni = build_universe(Box((0, 0, 0), 0), 1, 1.0, 1.0)
    assert uni.n_paths == 7
    assert len(uni.edges) == 6


def test_build_universe_validation():
    with pytest.raises(ValueError):
        build_universe([(0, 0, 0)], -1, 1.0, 1.0)
    with pytest.raises(ValueError):
        build_universe([(0, 0, 0)], 1, -0.5, 1.0)
    with pytest.raises(EmptySetError):
        build_universe([], 1, 1.0, 1.0)


def test_configuration_guard_aborts_oversized_regions():
    with pytest.raises(ValueError, match="guard"):
        build_universe([(0, 0, 0)], 2, 1.0, 1.0)
    with pytest.raises(ValueError, match="guard"):
        build_universe(Box((0, 0, 0), 1), 1, 1.0, 1.0)


def test_path_universe_validation(single_edge_universe):
    uni = single_edge_universe
    with pytest.raises(ValueError):
        PathUniverse(
            paths=tuple(range(21)),
            q=np.full(21, 0.5),
            path_masks=np.zeros(21, dtype=np.uint64),
            edges=(EDGE_X,),
            u=1.0, T=1.0, L_max=0,
        )
    with pytest.raises(ValueError):
        PathUniverse(
            paths=uni.paths, q=np.full(3, 0.5),
            path_masks=uni.path_masks, edges=uni.edges,
            u=1.0, T=1.0, L_max=4,
        )
    with pytest.raises(ValueError):
        PathUniverse(
            paths=uni.paths, q=np.full(10, 1.5),
            path_masks=uni.path_masks, edges=uni.edges,
            u=1.0, T=1.0, L_max=4,
        )
    with pytest.raises(ValueError):
        PathUniverse(
            paths=uni.paths, q=uni.q, path_masks=uni.path_masks,
            edges=tuple((i, i) for i in range(65)),
            u=1.0, T=1.0, L_max=4,
        )


# ---------------------------------------------------------------------------
# configuration law and exact functionals


def test_config_distribution_is_a_probability_law(two_vertex_universe):
    masks, probs = two_vertex_universe.config_distribution()
    assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)
    assert min(probs) >= 0.0
    assert len(np.unique(masks)) == len(masks)
    assert two_vertex_universe.config_distribution() is (masks, probs) or (
        two_vertex_universe.config_distribution()[1] == probs
    )


def test_edge_marginal_matches_bond_law(two_vertex_universe):
    p_hat = exact_expectation(two_vertex_universe, lambda es: EDGE_X in es)
    assert abs(p_hat - bond_open_probability(1.0, 1.0, 3)) < 1e-12


def test_side_edge_marginal_is_single_path(two_vertex_universe):
    p_hat = exact_expectation(two_vertex_universe, lambda es: EDGE_Y in es)
    assert abs(p_hat - (1.0 - math.exp(-1.0 / 8.0))) < 1e-12


def test_disjoint_edge_indicators_uncorrelated(two_vertex_universe):
    cov = covariance(
        two_vertex_universe,
        lambda es: EDGE_X in es,
        lambda es: EDGE_Y in es,
    )
    assert abs(cov) < 1e-14


def test_nested_indicator_covariance_closed_form(two_vertex_universe):
    cov = covariance(
        two_vertex_universe,
        lambda es: EDGE_X in es,
        lambda es: EDGE_X in es or EDGE_Y in es,
    )
    pin = (1.0 - math.exp(-0.25)) * math.exp(-3.0 / 8.0)
    assert abs(cov - pin) < 1e-12


def test_variance_is_bernoulli(two_vertex_universe):
    p = exact_expectation(two_vertex_universe, lambda es: EDGE_X in es)
    var = covariance(
        two_vertex_universe,
        lambda es: EDGE_X in es,
        lambda es: EDGE_X in es,
    )
    assert var == pytest.approx(p * (1.0 - p), abs=1e-12)


# ---------------------------------------------------------------------------
# monotone tables and association checks


def test_monotone_table_counts_match_reference():
    for m, expected in oracles.MONOTONE_FUNCTION_COUNTS.items():
        assert len(monotone_tables(m)) == expected
    with pytest.raises(ValueError):
        monotone_tables(-1)


def test_monotone_tables_are_monotone():
    for m in range(4):
        for t in monotone_tables(m):
            for s in range(1 << m):
                for sup in range(1 << m):
                    if s & sup == s:
                        assert (t >> s) & 1 <= (t >> sup) & 1


def test_exhaustive_association_on_chain(chain_universe):
    report = fkg_check(chain_universe)
    assert report["mode"] == "exhaustive"
    assert report["edge_count"] == 3
    assert report["pairs"] == 210
    assert report["passing"] == 210
    assert report["holds"]
    assert report["min_cov"] >= -1e-12


def test_random_association_mode():
    uni = build_universe([(0, 0, 0)], 1, 1.0, 1.0)
    report = fkg_check(uni, pair_budget=60, seed=5)
    assert report["mode"] == "random"
    assert report["edge_count"] == 6
    assert report["pairs"] == 60
    assert report["holds"]
    again = fkg_check(uni, pair_budget=60, seed=5)
    assert again["min_cov"] == report["min_cov"]


def test_edge_subset_restriction(two_vertex_universe):
    report = fkg_check(two_vertex_universe, edges=[EDGE_X, EDGE_Y])
    assert report["mode"] == "exhaustive"
    assert report["edge_count"] == 2
    assert report["pairs"] == 6 * 7 // 2
    assert report["holds"]
    with pytest.raises(ValueError, match="outside"):
        fkg_check(two_vertex_universe, edges=[((9, 9, 9), (10, 9, 9))])


def test_truncated_window_check():
    report = fkg_check_truncated(Box((0, 0, 0), 0), 1, 1.0, 1.0,
                                 pair_budget=40)
    assert report["mode"] == "random"
    assert report["holds"]


# ---------------------------------------------------------------------------
# independence factorization


def test_joint_absence_equals_marginal_product(single_edge_universe):
    uni = single_edge_universe
    for subset in ([], [0], [0, 3, 7], list(range(10))):
        assert joint_absence(uni, subset) == marginal_absence_product(
            uni, subset
        )
    assert isinstance(joint_absence(uni, [0, 1]), Fraction)


def test_absence_factorization_exhaustive(single_edge_universe):
    assert absence_factorization_exact(single_edge_universe, max_paths=10)


def test_joint_absence_index_validation(single_edge_universe):
    with pytest.raises(IndexError):
        joint_absence(single_edge_universe, [-1])
    with pytest.raises(IndexError):
        joint_absence(single_edge_universe, [10])


def test_empty_subset_absence_is_one(single_edge_universe):
    assert joint_absence(single_edge_universe, []) == Fraction(1)
    assert marginal_absence_product(single_edge_universe, []) == Fraction(1)
