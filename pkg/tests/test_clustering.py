"""Clustering contracts, checked against independent oracles.

The DBSCAN oracle recomputes the partition set-theoretically (union-find
over core points, border points to the lowest-id reachable cluster); the
k-means example oracle enumerates every 2-partition.
"""

import itertools

import numpy as np
import pytest

from kwsent.clustering import (
    NOISE,
    DBSCAN,
    KMeans,
    MeanShift,
    ClusterConfig,
    cluster_points,
    dbscan,
    default_bandwidth,
    default_eps,
    kmeans,
    mean_shift,
)


def two_blobs(rng, n_per=10, spread=0.3, separation=10.0, dim=2):
    a = rng.normal(scale=spread, size=(n_per, dim))
    b = rng.normal(scale=spread, size=(n_per, dim)) + separation
    return np.vstack([a, b])


# ----------------------------------------------------------------------
# k-means


def best_two_partition_objective(points):
    """Brute force: minimum sum of squared distances over all 2-partitions."""
    n = len(points)
    best = np.inf
    for bits in itertools.product([0, 1], repeat=n - 1):
        labels = np.array((0,) + bits)
        cost = 0.0
        for value in (0, 1):
            members = points[labels == value]
            if len(members):
                center = members.mean(axis=0)
                cost += ((members - center) ** 2).sum()
        best = min(best, cost)
    return best


class TestKMeans:
    def test_singleton_clusters_zero_objective(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(6, 3))
        result = kmeans(points, k=6, seed=1)
        assert result.objective == pytest.approx(0.0, abs=1e-12)
        assert sorted(result.labels) == list(range(6))

    def test_identical_points_zero_objective(self):
        points = np.ones((5, 2))
        result = kmeans(points, k=2, seed=0)
        assert result.objective == pytest.approx(0.0, abs=1e-12)

    def test_matches_exhaustive_best_two_partition(self):
        rng = np.random.default_rng(3)
        points = two_blobs(rng, n_per=4)
        result = kmeans(points, k=2, seed=0)
        assert result.objective == pytest.approx(best_two_partition_objective(points))

    def test_objective_monotone_nonincreasing(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            points = rng.normal(size=(40, 4))
            result = kmeans(points, k=5, seed=trial)
            history = np.array(result.objective_history)
            assert np.all(np.diff(history) <= 1e-9)

    def test_fixed_seed_bit_deterministic(self):
        rng = np.random.default_rng(8)
        points = rng.normal(size=(30, 3))
        a = kmeans(points, k=4, seed=123)
        b = kmeans(points, k=4, seed=123)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert a.objective == b.objective
        assert a.objective_history == b.objective_history

    def test_k_larger_than_points_rejected(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), k=4)


# ----------------------------------------------------------------------
# DBSCAN


def dbscan_oracle(points, eps, min_pts):
    """All-pairs reference with explicit set semantics."""
    n = len(points)
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    neighbor_sets = [set(np.nonzero(dist[i] <= eps)[0]) for i in range(n)]
    core = [len(neighbor_sets[i]) >= min_pts for i in range(n)]

    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for i in range(n):
        if not core[i]:
            continue
        for j in neighbor_sets[i]:
            if core[j]:
                union(i, j)

    # Components ordered by smallest core index get ids 0, 1, ...
    component_of = {}
    cluster_ids = {}
    labels = np.full(n, NOISE, dtype=np.int64)
    for i in range(n):
        if core[i]:
            root = find(i)
            if root not in cluster_ids:
                cluster_ids[root] = len(cluster_ids)
            labels[i] = cluster_ids[root]
            component_of[i] = cluster_ids[root]
    for i in range(n):
        if core[i]:
            continue
        reachable = [component_of[j] for j in neighbor_sets[i] if core[j]]
        if reachable:
            labels[i] = min(reachable)
    return labels


class TestDBSCAN:
    def test_all_noise_when_eps_below_min_distance(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        result = dbscan(points, eps=0.5, min_pts=2)
        assert np.all(result.labels == NOISE)

    def test_min_pts_one_no_noise(self):
        rng = np.random.default_rng(2)
        points = rng.normal(size=(25, 3))
        result = dbscan(points, eps=0.01, min_pts=1)
        assert np.all(result.labels != NOISE)

    def test_matches_oracle_on_random_instances(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(5, 60))
            points = rng.uniform(size=(n, 2))
            eps = float(rng.uniform(0.05, 0.4))
            min_pts = int(rng.integers(1, 6))
            expected = dbscan_oracle(points, eps, min_pts)
            result = dbscan(points, eps=eps, min_pts=min_pts)
            np.testing.assert_array_equal(result.labels, expected)

    def test_two_blobs_two_clusters(self):
        rng = np.random.default_rng(4)
        points = two_blobs(rng)
        result = dbscan(points, eps=1.5, min_pts=3)
        assert result.num_clusters == 2
        assert np.all(result.labels[:10] == result.labels[0])
        assert np.all(result.labels[10:] == result.labels[10])


# ----------------------------------------------------------------------
# mean-shift


class TestMeanShift:
    def test_single_point_one_cluster(self):
        result = mean_shift(np.array([[1.0, 2.0]]), bandwidth=1.0)
        assert result.num_clusters == 1
        assert result.labels.tolist() == [0]

    def test_two_far_blobs_two_clusters(self):
        rng = np.random.default_rng(9)
        bandwidth = 1.0
        points = two_blobs(rng, spread=0.1, separation=10 * bandwidth)
        result = mean_shift(points, bandwidth=bandwidth)
        assert result.num_clusters == 2
        assert len(set(result.labels[:10])) == 1
        assert len(set(result.labels[10:])) == 1

    def test_bandwidth_covering_diameter_one_cluster(self):
        rng = np.random.default_rng(10)
        points = rng.uniform(size=(20, 3))
        diameter = np.sqrt(
            ((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)
        ).max()
        result = mean_shift(points, bandwidth=diameter * 1.01)
        assert result.num_clusters == 1

    def test_cluster_count_nonincreasing_in_bandwidth(self):
        rng = np.random.default_rng(11)
        centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]])
        points = np.vstack(
            [rng.normal(scale=0.2, size=(12, 2)) + c for c in centers]
        )
        counts = [
            mean_shift(points, bandwidth=bw).num_clusters
            for bw in (0.8, 1.6, 3.2, 6.4, 12.8)
        ]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 4
        assert counts[-1] == 1


# ----------------------------------------------------------------------
# config + estimators


class TestConfigAndDefaults:
    def test_defaults_resolve_from_data(self):
        rng = np.random.default_rng(12)
        points = rng.normal(size=(50, 4))
        config = ClusterConfig(method="kmeans").resolve(points)
        assert config.k == 5  # round(sqrt(50/2))
        assert default_eps(points) > 0
        assert default_bandwidth(points) > 0

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            ClusterConfig(method="spectral")
        with pytest.raises(ValueError):
            ClusterConfig(eps=-1.0)
        with pytest.raises(ValueError):
            ClusterConfig(min_pts=0)

    def test_dispatch_all_methods(self):
        rng = np.random.default_rng(13)
        points = two_blobs(rng)
        for method in ("kmeans", "dbscan", "meanshift"):
            result = cluster_points(points, ClusterConfig(method=method, k=2))
            assert len(result.labels) == len(points)
            assert result.method == method

    def test_cosine_metric_normalizes(self):
        # Two rays with very different norms collapse under cosine.
        points = np.array([[1.0, 0.0], [100.0, 0.0], [0.0, 1.0], [0.0, 80.0]])
        result = cluster_points(
            points, ClusterConfig(method="kmeans", k=2, metric="cosine", seed=0)
        )
        assert result.labels[0] == result.labels[1]
        assert result.labels[2] == result.labels[3]
        assert result.labels[0] != result.labels[2]


class TestEstimators:
    def test_kmeans_estimator_api(self):
        rng = np.random.default_rng(14)
        points = two_blobs(rng)
        est = KMeans(n_clusters=2, seed=0).fit(points)
        assert est.labels_.shape == (20,)
        assert est.inertia_ >= 0
        assert est.get_params() == {"n_clusters": 2, "max_iter": 100, "seed": 0}
        predictions = est.predict(points)
        np.testing.assert_array_equal(predictions, est.labels_)

    def test_dbscan_estimator_api(self):
        rng = np.random.default_rng(15)
        points = two_blobs(rng)
        labels = DBSCAN(eps=1.5, min_pts=3).fit_predict(points)
        assert set(labels) == {0, 1}

    def test_meanshift_estimator_auto_bandwidth(self):
        rng = np.random.default_rng(16)
        points = two_blobs(rng)
        est = MeanShift().fit(points)
        assert est.n_clusters_ >= 1
        assert est.cluster_centers_.shape[1] == 2
