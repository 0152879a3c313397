import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subspace_fp.base_search import (
    ABSENT,
    MembershipTable,
    SubspaceSet,
    build_membership,
    cluster_base,
    default_policy,
    enumerate_subspaces,
    trim_far_members,
)
from subspace_fp.dataset import (
    bench_spec,
    disjoint_spec,
    generate_covariant_fixture,
    generate_synthetic,
)
from subspace_fp.metrics import nmi

from conftest import z5_csv, z5_table


def test_all_pairs_count():
    assert len(enumerate_subspaces(50, policy="all")) == 1225


def test_two_dims_single_pair():
    assert enumerate_subspaces(2, policy="all").subspaces == ((0, 1),)


def test_all_pairs_lexicographic():
    s = enumerate_subspaces(4, policy="all").subspaces
    assert list(s) == sorted(s)


def test_sampled_coverage_large_d():
    s = enumerate_subspaces(200, policy="sample", count=1000, coverage=5, seed=7)
    assert len(s) == 1000
    assert s.coverage(200).min() >= 5


def test_sample_too_small_for_coverage():
    with pytest.raises(ValueError, match="need at least 500"):
        enumerate_subspaces(200, policy="sample", count=499, coverage=5)


def test_sample_more_than_exist():
    with pytest.raises(ValueError, match="only 6"):
        enumerate_subspaces(4, policy="sample", count=7, coverage=1)


def test_all_policy_rejects_p3():
    with pytest.raises(ValueError):
        enumerate_subspaces(5, p=3, policy="all")


def test_default_policy_threshold():
    assert default_policy(99) == "all" and default_policy(100) == "sample"


@settings(max_examples=60, deadline=None)
@given(
    d=st.integers(3, 40),
    p=st.integers(2, 3),
    coverage=st.integers(1, 4),
    extra=st.integers(0, 20),
    seed=st.integers(0, 2**16),
)
def test_sampling_meets_coverage(d, p, coverage, extra, seed):
    needed = math.ceil(coverage * d / p)
    count = min(needed + extra, math.comb(d, p))
    if count < needed:
        return
    s = enumerate_subspaces(d, p=p, policy="sample", count=count, coverage=coverage, seed=seed)
    assert len(s) == count
    assert len(set(s.subspaces)) == count
    assert s.coverage(d).min() >= coverage
    again = enumerate_subspaces(d, p=p, policy="sample", count=count, coverage=coverage, seed=seed)
    assert again == s


def test_k1_single_label():
    assert cluster_base(np.random.default_rng(0).normal(size=(20, 2)), 1).tolist() == [0] * 20


def test_separated_blobs_split_exactly():
    rng = np.random.default_rng(1)
    a = rng.uniform(-0.1, 0.1, size=(15, 2))
    b = rng.uniform(-0.1, 0.1, size=(15, 2)) + 10
    labels = cluster_base(np.vstack([a, b]), 2, seed=3)
    assert len(set(labels[:15])) == 1 and len(set(labels[15:])) == 1
    assert labels[0] != labels[15]


def test_k_out_of_range():
    with pytest.raises(ValueError):
        cluster_base(np.zeros((3, 2)), 4)


def test_duplicate_points_keep_every_cluster_nonempty():
    labels = cluster_base(np.zeros((10, 2)), 3, seed=0)
    assert sorted(set(labels.tolist())) == [0, 1, 2]


def test_restarts_never_raise_inertia():
    X = generate_covariant_fixture("independent-dense", seed=2).values

    def inertia(labels):
        return sum(((X[labels == c] - X[labels == c].mean(0)) ** 2).sum() for c in set(labels))

    one = inertia(cluster_base(X, 6, seed=5, n_init=1))
    five = inertia(cluster_base(X, 6, seed=5, n_init=5))
    assert five <= one + 1e-9


def _oracle_labels(X):
    means = np.array([[1.0, 1.0], [7.0, 7.0], [10.0, 10.0]])
    return ((X[:, None, :] - means[None]) ** 2).sum(axis=2).argmin(axis=1)


@pytest.mark.parametrize("seed", range(3))
def test_covariant_pair_close_to_true_mean_classifier(seed):
    X = generate_covariant_fixture("covariant", seed=seed).values[:, [0, 1]]
    thirds = np.repeat([0, 1, 2], 100)
    best = nmi(_oracle_labels(X), thirds)
    got = nmi(cluster_base(X, 3, seed=0, n_init=5), thirds)
    assert got >= best - 0.03


@pytest.mark.xfail(strict=True, reason="the thirds overlap; even the true-mean classifier stays below 0.9")
def test_covariant_pair_nmi_at_least_0_9():
    X = generate_covariant_fixture("covariant", seed=0).values
    labels = cluster_base(X[:, [0, 1]], 3, seed=0)
    assert nmi(labels, np.repeat([0, 1, 2], 100)) >= 0.9


def test_membership_on_covariant_fixture():
    X = generate_covariant_fixture("covariant", seed=0).values
    z = build_membership(X, enumerate_subspaces(3, policy="all"), 3, min_base_size=10)
    assert z.labels.shape == (300, 3)
    assert (z.labels != ABSENT).all()
    for j in range(3):
        assert len(set(z.labels[:, j].tolist())) == 3


def test_min_base_size_above_n_erases_everything():
    X = np.random.default_rng(0).normal(size=(12, 3))
    z = build_membership(X, enumerate_subspaces(3, policy="all"), 2, min_base_size=13)
    assert (z.labels == ABSENT).all()


def test_every_item_meets_min_base_size():
    X, _ = generate_synthetic(bench_spec(150, 8))
    z = build_membership(X, enumerate_subspaces(8, policy="all"), 6, min_base_size=20)
    for j in range(z.m):
        col = z.labels[:, j]
        sizes = np.bincount(col[col >= 0])
        assert all(s == 0 or s >= 20 for s in sizes)


def test_threads_do_not_change_the_table():
    X, _ = generate_synthetic(bench_spec(120, 6, seed=3))
    subs = enumerate_subspaces(6, policy="all")
    one = build_membership(X, subs, 4, seed=11)
    many = build_membership(X, subs, 4, seed=11, threads=4)
    np.testing.assert_array_equal(one.labels, many.labels)


def test_column_depends_only_on_its_position_seed():
    X, _ = generate_synthetic(bench_spec(120, 6, seed=3))
    subs = enumerate_subspaces(6, policy="all")
    full = build_membership(X, subs, 4, seed=11)
    for j in (0, 4, 14):
        alone = build_membership(X, SubspaceSet((subs[j],), 2), 4, seed=11 ^ j)
        np.testing.assert_array_equal(alone.labels[:, 0], full.labels[:, j])


def test_same_pair_items_share_more_within_clusters():
    X, truth = generate_synthetic(disjoint_spec(seed=0))
    z = build_membership(X, enumerate_subspaces(35, policy="all"), 10, min_base_size=20)
    rng = np.random.default_rng(0)
    labels = truth.labels()

    def shared(i, j):
        a, b = z.labels[i], z.labels[j]
        return int(((a == b) & (a != ABSENT)).sum())

    same = [shared(*rng.choice(300, 2, replace=False)) for _ in range(200)]
    cross = [shared(rng.integers(300), 300 + rng.integers(300)) for _ in range(200)]
    assert labels[0] == 0
    assert np.mean(same) > np.mean(cross)


def test_trim_drops_far_strays_only():
    rng = np.random.default_rng(0)
    core = rng.normal(size=(200, 2))
    strays = rng.uniform(20, 30, size=(10, 2))
    points = np.vstack([core, strays])
    labels = np.zeros(len(points), dtype=np.int64)
    out = trim_far_members(points, labels, 1, 4.0)
    assert (out[200:] == ABSENT).all()
    assert (out[:200] != ABSENT).mean() > 0.99


def test_trim_keeps_uniform_cell_whole():
    points = np.random.default_rng(1).uniform(0, 1, size=(500, 2))
    out = trim_far_members(points, np.zeros(500, dtype=np.int64), 1, 2.0)
    assert (out == 0).all()


def test_trim_must_be_at_least_one():
    with pytest.raises(ValueError):
        build_membership(np.zeros((4, 2)), SubspaceSet(((0, 1),), 2), 1, trim=0.5)


def test_membership_csv_roundtrip(z5):
    buf = io.StringIO()
    z5.to_csv(buf)
    assert buf.getvalue() == z5_csv()
    back = MembershipTable.from_csv(io.StringIO(buf.getvalue()))
    np.testing.assert_array_equal(back.labels, z5.labels)
    assert back.subspaces == z5.subspaces


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("X0-1\n1\n", "line 1"),
        ("S0-1,S0-2\n1\n", "line 2"),
        ("S0-1\nz\n", "line 2"),
    ],
)
def test_membership_csv_errors(text, match):
    with pytest.raises(ValueError, match=match):
        MembershipTable.from_csv(io.StringIO(text))


def test_table_shape_must_match_subspaces():
    with pytest.raises(ValueError):
        MembershipTable(np.zeros((2, 3)), SubspaceSet(((0, 1),), 2))


def test_z5_table_is_canonical():
    z = z5_table()
    assert z.n == 5 and z.m == 6
