import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssi.cluster import ClusterModel, assign, cluster_stats, kmeans


def brute_force_two_partition(points):
    """Minimum-SSE split of points into two non-empty groups, by enumeration."""
    n = len(points)
    best = None
    for mask in itertools.product([0, 1], repeat=n):
        if mask[0] == 1 or len(set(mask)) < 2:
            continue
        m = np.array(mask)
        sse = sum(((points[m == g] - points[m == g].mean(axis=0)) ** 2).sum() for g in (0, 1))
        if best is None or sse < best[0]:
            best = (sse, m)
    return best


def partition(labels):
    groups = {}
    for i, g in enumerate(labels):
        groups.setdefault(int(g), set()).add(i)
    return {frozenset(v) for v in groups.values()}


def test_exact_split():
    m = kmeans([[0.0], [10.0]], 2, seed=1)
    assert sorted(m.centroids[:, 0].tolist()) == [0.0, 10.0]
    assert m.inertia == 0.0


def test_k1_is_mean(rng):
    X = rng.normal(size=(37, 3))
    m = kmeans(X, 1, seed=4)
    np.testing.assert_allclose(m.centroids[0], X.mean(axis=0), atol=1e-12)
    assert not m.assignments.any()


def test_four_point_example_matches_brute_force():
    X = np.array([[0, 0], [0.1, 0], [9, 9], [9.1, 9]])
    sse, mask = brute_force_two_partition(X)
    for seed in range(10):
        m = kmeans(X, 2, seed=seed)
        assert partition(m.assignments) == partition(mask) == {frozenset({0, 1}), frozenset({2, 3})}
        cents = sorted(map(tuple, np.round(m.centroids, 12)))
        np.testing.assert_allclose(cents, [(0.05, 0.0), (9.05, 9.0)], atol=1e-12)
        assert m.inertia == pytest.approx(sse, rel=1e-12)


@pytest.mark.parametrize("k, n", [(0, 3), (4, 3)])
def test_invalid_k(k, n):
    with pytest.raises(ValueError):
        kmeans(np.zeros((n, 2)), k, seed=0)


def _check_model(X, m: ClusterModel):
    hist = np.array(m.inertia_history)
    assert np.all(np.diff(hist) <= 1e-9 * max(1.0, hist[0]))
    labels, d2 = assign(X, m.centroids)
    assert np.array_equal(labels, m.assignments), "final assignment must be a fixed point"
    assert m.inertia == pytest.approx(float(d2.sum()), rel=1e-9, abs=1e-12)
    assert np.all(m.sizes() > 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 120), st.integers(1, 3), st.integers(1, 8), st.integers(0, 2**32))
def test_lloyd_invariants(n, d, k, seed):
    X = np.random.default_rng(seed).normal(size=(n, d))
    m = kmeans(X, min(k, n), seed=seed)
    _check_model(X, m)


def test_duplicate_points_and_empty_repair():
    X = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 2)
    m = kmeans(X, 3, seed=0)
    assert np.all(m.sizes() > 0)


def test_determinism(rng):
    X = rng.normal(size=(200, 2))
    a, b = kmeans(X, 7, seed=42), kmeans(X, 7, seed=42)
    assert a.centroids.tobytes() == b.centroids.tobytes()
    assert np.array_equal(a.assignments, b.assignments)
    assert a.inertia_history == b.inertia_history


def test_permutation_gives_same_partition():
    # well-separated blobs: no distance ties, unique optimum
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(c, 0.2, size=(15, 2)) for c in ([0, 0], [8, 0], [0, 8])])
    perm = rng.permutation(len(X))
    a = kmeans(X, 3, seed=1)
    b = kmeans(X[perm], 3, seed=1)
    back = np.empty_like(b.assignments)
    back[perm] = b.assignments
    assert partition(a.assignments) == partition(back)


def test_cluster_stats_counting():
    m = ClusterModel(k=2, centroids=np.zeros((2, 1)), assignments=np.array([0, 0, 1]), inertia=0.0, iterations_run=0)
    s = cluster_stats(m, [1, 0, 1])
    assert [(c.size, c.positives, c.negatives) for c in s] == [(2, 1, 1), (1, 1, 0)]


def test_cluster_stats_single_cluster():
    m = ClusterModel(k=1, centroids=np.zeros((1, 1)), assignments=np.zeros(5, int), inertia=0.0, iterations_run=0)
    (s,) = cluster_stats(m, [1, 1, 0, 1, 0])
    assert (s.size, s.positives, s.negatives) == (5, 3, 2)


def test_cluster_stats_length_mismatch():
    m = ClusterModel(k=1, centroids=np.zeros((1, 1)), assignments=np.zeros(3, int), inertia=0.0, iterations_run=0)
    with pytest.raises(ValueError):
        cluster_stats(m, [1, 0])


@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=1, max_size=80))
def test_cluster_stats_sum_to_totals(rows):
    assignments = np.array([a for a, _ in rows])
    labels = np.array([b for _, b in rows])
    k = int(assignments.max()) + 1
    m = ClusterModel(k=k, centroids=np.zeros((k, 1)), assignments=assignments, inertia=0.0, iterations_run=0)
    s = cluster_stats(m, labels)
    assert sum(c.positives for c in s) == labels.sum()
    assert sum(c.negatives for c in s) == (~labels).sum()
    assert all(c.size == c.positives + c.negatives for c in s)
