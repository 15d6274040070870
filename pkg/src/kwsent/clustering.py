"""Clustering of embedding vectors: k-means, DBSCAN, and mean-shift.

All three run on raw point arrays under the Euclidean metric (a cosine
variant is available by normalizing rows first, since squared Euclidean
distance on unit vectors is an affine function of cosine distance).
k-means exposes its per-iteration objective history so the non-increase
guarantee of Lloyd's algorithm can be asserted, not assumed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .validation import as_points, check_positive

NOISE = -1


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of points into clusters.

    labels: per-point cluster id; NOISE (-1) allowed for density methods.
    num_clusters: number of cluster ids handed out (k-means counts empty
        clusters; density methods count only realized ones).
    objective: k-means sum of squared distances to assigned centroids.
    objective_history: the objective after every Lloyd iteration.
    centers: centroids (k-means) or merged modes (mean-shift).
    """

    labels: np.ndarray
    num_clusters: int
    method: str
    objective: float | None = None
    objective_history: tuple[float, ...] | None = None
    centers: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        real = labels[labels != NOISE]
        if real.size and (real.min() < 0 or real.max() >= self.num_clusters):
            raise ValueError("cluster labels outside [0, num_clusters)")
        if real.size and self.num_clusters < 1:
            raise ValueError("num_clusters must be >= 1 when any point is clustered")


@dataclass
class ClusterConfig:
    """Method selection plus hyperparameters for the pipeline.

    Unset hyperparameters (None) are resolved against the data with the
    standard heuristics in ``resolve``.
    """

    method: str = "kmeans"
    k: int | None = None
    max_iter: int = 100
    eps: float | None = None
    min_pts: int = 4
    bandwidth: float | None = None
    seed: int = 0
    metric: str = "euclidean"

    def __post_init__(self):
        if self.method not in ("kmeans", "dbscan", "meanshift"):
            raise ValueError(f"unknown clustering method {self.method!r}")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.eps is not None:
            check_positive("eps", self.eps)
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")
        if self.bandwidth is not None:
            check_positive("bandwidth", self.bandwidth)

    def resolve(self, points: np.ndarray) -> "ClusterConfig":
        resolved = ClusterConfig(**self.__dict__)
        if resolved.method == "kmeans" and resolved.k is None:
            resolved.k = default_k(points.shape[0])
        if resolved.method == "dbscan" and resolved.eps is None:
            resolved.eps = default_eps(points)
        if resolved.method == "meanshift" and resolved.bandwidth is None:
            resolved.bandwidth = default_bandwidth(points, seed=resolved.seed)
        return resolved


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of a and rows of b."""
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return sq


def normalize_rows(points: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows are left untouched."""
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return points / norms


def default_k(n_points: int) -> int:
    """Rule-of-thumb cluster count: round(sqrt(n/2)), at least 1."""
    return max(1, int(round(np.sqrt(n_points / 2.0))))


def default_eps(points: np.ndarray, neighbor: int = 4) -> float:
    """Median distance to the ``neighbor``-th nearest neighbor."""
    points = as_points(points)
    n = points.shape[0]
    neighbor = min(neighbor, n - 1)
    if neighbor < 1:
        return 1.0
    sq = _pairwise_sq_dists(points, points)
    sq.sort(axis=1)
    kth = np.sqrt(sq[:, neighbor])
    eps = float(np.median(kth))
    return eps if eps > 0 else 1.0


def default_bandwidth(points: np.ndarray, seed: int = 0, subsample: int = 1000) -> float:
    """Median pairwise distance of a seeded subsample of at most 1000 points."""
    points = as_points(points)
    n = points.shape[0]
    if n > subsample:
        rng = np.random.default_rng(seed)
        points = points[rng.choice(n, size=subsample, replace=False)]
    sq = _pairwise_sq_dists(points, points)
    upper = sq[np.triu_indices(points.shape[0], k=1)]
    if upper.size == 0:
        return 1.0
    bandwidth = float(np.sqrt(np.median(upper)))
    return bandwidth if bandwidth > 0 else 1.0


def kmeans(points, k: int, max_iter: int = 100, seed: int = 0) -> ClusterAssignment:
    """Lloyd's algorithm with k-means++ seeding.

    The objective (sum of squared distances to the assigned centroid) is
    recorded after every assignment step and verified to be non-increasing.
    Ties in assignment go to the lowest centroid index, so a fixed seed is
    bit-deterministic.
    """
    points = as_points(points)
    n = points.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest_sq = _pairwise_sq_dists(points, centers[:1]).ravel()
    for j in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest_sq / total))
        centers[j] = points[idx]
        np.minimum(
            closest_sq,
            _pairwise_sq_dists(points, centers[j : j + 1]).ravel(),
            out=closest_sq,
        )

    labels = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iter):
        sq = _pairwise_sq_dists(points, centers)
        new_labels = np.argmin(sq, axis=1)
        objective = float(sq[np.arange(n), new_labels].sum())
        if history and objective > history[-1] + 1e-9:
            raise AssertionError(
                f"k-means objective increased: {history[-1]} -> {objective}"
            )
        history.append(objective)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
            else:
                # Reseat an empty centroid on the point farthest from its
                # current centroid; this cannot increase the objective.
                farthest = int(np.argmax(sq[np.arange(n), labels]))
                centers[j] = points[farthest]
    return ClusterAssignment(
        labels=labels,
        num_clusters=k,
        method="kmeans",
        objective=history[-1],
        objective_history=tuple(history),
        centers=centers.copy(),
    )


def dbscan(points, eps: float, min_pts: int) -> ClusterAssignment:
    """Density-based clustering with core/border/noise semantics.

    A point is core when its eps-ball (itself included) holds at least
    min_pts points. Clusters are grown from core points in index order, so
    a border point reachable from several clusters joins the one with the
    smallest id. Noise keeps the label -1.
    """
    points = as_points(points)
    check_positive("eps", eps)
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    n = points.shape[0]
    eps_sq = eps * eps

    neighbors: list[np.ndarray] = []
    chunk = max(1, int(2**22) // max(1, n))
    for start in range(0, n, chunk):
        sq = _pairwise_sq_dists(points[start : start + chunk], points)
        for row in sq:
            neighbors.append(np.nonzero(row <= eps_sq)[0])
    core = np.array([len(nb) >= min_pts for nb in neighbors], dtype=bool)

    labels = np.full(n, NOISE, dtype=np.int64)
    cluster_id = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster_id
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for nb in neighbors[j]:
                if labels[nb] == NOISE:
                    labels[nb] = cluster_id
                    if core[nb]:
                        queue.append(nb)
        cluster_id += 1
    return ClusterAssignment(labels=labels, num_clusters=cluster_id, method="dbscan")


def mean_shift(
    points, bandwidth: float, max_iter: int = 300, tol: float = 1e-6
) -> ClusterAssignment:
    """Flat-kernel mean-shift.

    Every point ascends to the mean of its bandwidth-ball until the shift
    falls below tol; converged modes closer than bandwidth/2 are merged, in
    point-index order, and each point joins its mode's cluster.
    """
    points = as_points(points)
    check_positive("bandwidth", bandwidth)
    n = points.shape[0]
    bw_sq = bandwidth * bandwidth

    modes = points.copy()
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        sq = _pairwise_sq_dists(modes[active], points)
        inside = sq <= bw_sq
        counts = inside.sum(axis=1)
        counts[counts == 0] = 1
        shifted = (inside @ points) / counts[:, None]
        moved = np.linalg.norm(shifted - modes[active], axis=1) > tol
        modes[active] = shifted
        still = np.zeros(n, dtype=bool)
        still[np.nonzero(active)[0][moved]] = True
        active = still

    merge_sq = (bandwidth / 2.0) ** 2
    canonical: list[np.ndarray] = []
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        assigned = -1
        for cid, canon in enumerate(canonical):
            if np.sum((modes[i] - canon) ** 2) <= merge_sq:
                assigned = cid
                break
        if assigned < 0:
            assigned = len(canonical)
            canonical.append(modes[i])
        labels[i] = assigned
    return ClusterAssignment(
        labels=labels,
        num_clusters=len(canonical),
        method="meanshift",
        centers=np.array(canonical),
    )


def cluster_points(points, config: ClusterConfig) -> ClusterAssignment:
    """Dispatch on a ClusterConfig, resolving unset hyperparameters."""
    points = as_points(points)
    if config.metric == "cosine":
        points = normalize_rows(points)
    config = config.resolve(points)
    if config.method == "kmeans":
        return kmeans(points, config.k, config.max_iter, config.seed)
    if config.method == "dbscan":
        return dbscan(points, config.eps, config.min_pts)
    return mean_shift(points, config.bandwidth)


class KMeans(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`kmeans`.

    Attributes after fit: ``labels_``, ``cluster_centers_``, ``inertia_``,
    ``objective_history_``.
    """

    def __init__(self, n_clusters: int = 8, max_iter: int = 100, seed: int = 0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        result = kmeans(as_points(X), self.n_clusters, self.max_iter, self.seed)
        self.labels_ = result.labels
        self.cluster_centers_ = result.centers
        self.inertia_ = result.objective
        self.objective_history_ = result.objective_history
        return self

    def predict(self, X):
        sq = _pairwise_sq_dists(as_points(X), self.cluster_centers_)
        return np.argmin(sq, axis=1)


class DBSCAN(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`dbscan`; noise points get label -1."""

    def __init__(self, eps: float = 0.5, min_pts: int = 4):
        self.eps = eps
        self.min_pts = min_pts

    def fit(self, X, y=None):
        result = dbscan(as_points(X), self.eps, self.min_pts)
        self.labels_ = result.labels
        self.n_clusters_ = result.num_clusters
        return self


class MeanShift(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`mean_shift`."""

    def __init__(self, bandwidth: float | None = None, seed: int = 0):
        self.bandwidth = bandwidth
        self.seed = seed

    def fit(self, X, y=None):
        X = as_points(X)
        bandwidth = self.bandwidth
        if bandwidth is None:
            bandwidth = default_bandwidth(X, seed=self.seed)
        result = mean_shift(X, bandwidth)
        self.labels_ = result.labels
        self.cluster_centers_ = result.centers
        self.n_clusters_ = result.num_clusters
        return self
