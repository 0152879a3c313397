import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subspace_fp.assembly import ClusteringResult, SubspaceCluster
from subspace_fp.dataset import GroundTruth
from subspace_fp.fp_miner import Item
from subspace_fp.metrics import coherence_profile, flatten_for_nmi, nmi, pair_scores

from oracles import NMI_FIXTURES, PAIR_FIXTURES, nmi_oracle, pair_oracle


def _result(n, point_sets, pattern_sizes=None):
    sizes = pattern_sizes or [1] * len(point_sets)
    clusters = [
        SubspaceCluster(i, tuple(Item(j, 0) for j in range(size)), len(pts), tuple(sorted(pts)), (0,))
        for i, (pts, size) in enumerate(zip(point_sets, sizes))
    ]
    return ClusteringResult(n, clusters)


def test_identical_partitions():
    assert nmi([0, 0, 1, 1, 2], [4, 4, 3, 3, 9]) == pytest.approx(1.0, abs=1e-12)


def test_independent_partitions():
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)


def test_small_case_against_entropy_formula():
    a, b = [0, 0, 0, 1], [0, 0, 1, 1]
    assert abs(nmi(a, b) - nmi_oracle(a, b)) <= 1e-12


@pytest.mark.parametrize("a, b", NMI_FIXTURES)
def test_nmi_fixtures(a, b):
    assert abs(nmi(a, b) - nmi_oracle(a, b)) <= 1e-12


def test_single_cluster_conventions():
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 0], [0, 1, 1]) == 0.0


def test_geometric_average():
    a, b = [0, 0, 1, 1, 1], [0, 1, 1, 2, 2]
    from oracles import entropy
    import math
    mi = nmi_oracle(a, b) * (entropy(a) + entropy(b)) / 2
    assert nmi(a, b, average="geometric") == pytest.approx(mi / math.sqrt(entropy(a) * entropy(b)), abs=1e-12)
    with pytest.raises(ValueError):
        nmi(a, b, average="harmonic")


def test_length_mismatch():
    with pytest.raises(ValueError):
        nmi([0, 1], [0, 1, 2])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60))
def test_nmi_symmetric_bounded_and_matches_oracle(pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    v = nmi(a, b)
    assert 0.0 <= v <= 1.0
    assert abs(v - nmi(b, a)) <= 1e-12
    assert abs(v - nmi_oracle(a, b)) <= 1e-9


# ------------------------------------------------------------------ flatten


def test_flatten_worked_example():
    r = _result(5, [{0, 1, 2}, {3, 4}], [3, 4])
    labels = flatten_for_nmi(r, 5)
    assert labels.tolist() == [0, 0, 0, 1, 1]


def test_flatten_no_clusters_all_distinct():
    labels = flatten_for_nmi(ClusteringResult(3, []), 3)
    assert len(set(labels.tolist())) == 3


def test_flatten_longest_pattern_wins():
    r = _result(4, [{0, 1, 2, 3}, {0, 1}], [3, 4])
    assert flatten_for_nmi(r).tolist() == [1, 1, 0, 0]


def test_flatten_ties_prefer_bigger_cluster():
    r = _result(4, [{0, 1}, {1, 2, 3}], [2, 2])
    assert flatten_for_nmi(r).tolist() == [0, 1, 1, 1]


# -------------------------------------------------------------------- pairs


def test_perfect_pairs():
    truth = GroundTruth(5, [(frozenset({0, 1, 2}), frozenset()), (frozenset({3, 4}), frozenset())])
    s = pair_scores(_result(5, [{0, 1, 2}, {3, 4}]), truth)
    assert tuple(s) == (1.0, 1.0, 1.0)


def test_one_big_cluster_pairs():
    truth = GroundTruth(5, [(frozenset({0, 1, 2}), frozenset()), (frozenset({3, 4}), frozenset())])
    s = pair_scores(_result(5, [set(range(5))]), truth)
    assert s.precision == pytest.approx(4 / 10, abs=1e-12)
    assert s.recall == 1.0
    assert (s.tp, s.fp, s.fn) == (4, 6, 0)


def test_empty_prediction_pairs():
    truth = GroundTruth(5, [(frozenset({0, 1, 2}), frozenset())])
    assert tuple(pair_scores(ClusteringResult(5, []), truth)) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("pred, truth, n", PAIR_FIXTURES)
def test_pair_fixtures(pred, truth, n):
    got = pair_scores(pred, truth, n=n, block=3)
    want = pair_oracle(pred, truth, n)
    for g, w in zip(got, want):
        assert abs(g - w) <= 1e-12


def test_pair_size_mismatch():
    with pytest.raises(ValueError):
        pair_scores(ClusteringResult(4, []), GroundTruth(5, []))


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(2, 25),
    pred=st.lists(st.frozensets(st.integers(0, 24), max_size=10), max_size=4),
    truth=st.lists(st.frozensets(st.integers(0, 24), max_size=10), max_size=4),
    block=st.integers(1, 30),
)
def test_pairs_match_enumeration(n, pred, truth, block):
    pred = [frozenset(i for i in s if i < n) for s in pred]
    truth = [frozenset(i for i in s if i < n) for s in truth]
    got = pair_scores(pred, truth, n=n, block=block)
    for g, w in zip(got, pair_oracle(pred, truth, n)):
        assert abs(g - w) <= 1e-12


# ---------------------------------------------------------------- coherence


def test_planted_cluster_is_tighter_on_its_dims():
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 20, size=(200, 6))
    X[:100, :3] = rng.normal(5, 0.5, size=(100, 3))
    c = SubspaceCluster(0, (), 100, tuple(range(100)), (0, 1, 2))
    prof = coherence_profile(c, X)
    assert prof.flagged.tolist() == [True] * 3 + [False] * 3
    assert prof.stds[prof.flagged].max() < prof.stds[~prof.flagged].min()
    assert prof.flagged_std < prof.unflagged_std


def test_one_point_cluster_has_zero_spread():
    X = np.arange(12.0).reshape(4, 3)
    prof = coherence_profile(SubspaceCluster(0, (), 1, (2,), (1,)), X)
    np.testing.assert_array_equal(prof.stds, 0.0)
    np.testing.assert_array_equal(prof.means, X[2])
