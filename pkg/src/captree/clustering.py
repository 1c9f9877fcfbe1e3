"""K-Means with k-means++ seeding, Silhouette scoring, and cluster-count selection.

Everything here is deterministic under the configured seed: seeding draws
come from a seeded generator, ties in assignment go to the lowest cluster
index, empty clusters are reseeded to the point farthest from its centroid,
and ties across restarts or cluster counts resolve to the earliest candidate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .core import ValidationError


@dataclass
class ClusteringConfig:
    k_min: int = 2
    k_max: int = 10
    restarts: int = 10
    max_iterations: int = 300
    tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.k_min <= self.k_max:
            raise ValidationError(f"need 2 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValidationError("restarts and max_iterations must be >= 1")


@dataclass
class Clustering:
    assignments: np.ndarray  # int labels, shape (n,)
    centroids: np.ndarray  # shape (k, dim)
    inertia: float

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


def _plusplus_seeds(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centers = np.empty((k, vectors.shape[1]), dtype=vectors.dtype)
    centers[0] = vectors[int(rng.integers(n))]
    d2 = ((vectors - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        cumulative = np.cumsum(d2)
        total = float(cumulative[-1])
        if total <= 0.0:
            index = int(rng.integers(n))
        else:
            index = min(int(np.searchsorted(cumulative, rng.random() * total, side="right")), n - 1)
        centers[i] = vectors[index]
        d2 = np.minimum(d2, ((vectors - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(vectors: np.ndarray, k: int, rng: np.random.Generator, config: ClusteringConfig) -> Clustering:
    centroids = _plusplus_seeds(vectors, k, rng)
    n = vectors.shape[0]
    labels = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for _ in range(config.max_iterations):
        dist2 = cdist(vectors, centroids, "sqeuclidean")
        labels = dist2.argmin(axis=1)
        counts = _repair_empty_clusters(vectors, centroids, labels, dist2, k)
        onehot = np.zeros((n, k))
        onehot[rows, labels] = 1.0
        new_centroids = (onehot.T @ vectors) / counts[:, None]
        shift = float(((new_centroids - centroids) ** 2).sum())
        centroids = new_centroids
        if shift <= config.tolerance:
            break
    dist2 = cdist(vectors, centroids, "sqeuclidean")
    labels = dist2.argmin(axis=1)
    _repair_empty_clusters(vectors, centroids, labels, dist2, k)
    inertia = float(((vectors - centroids[labels]) ** 2).sum())
    return Clustering(assignments=labels, centroids=centroids, inertia=inertia)


def _repair_empty_clusters(
    vectors: np.ndarray, centroids: np.ndarray, labels: np.ndarray, dist2: np.ndarray, k: int
) -> np.ndarray:
    """Reseed each empty cluster to the farthest point of a multi-member cluster.

    Mutates centroids and labels in place; returns the repaired counts. Ties
    resolve to the lowest point index, keeping runs reproducible.
    """
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        point_d2 = dist2[np.arange(len(labels)), labels]
        movable = counts[labels] > 1
        candidates = np.where(movable, point_d2, -1.0)
        far = int(candidates.argmax())
        centroids[empty] = vectors[far]
        counts[labels[far]] -= 1
        labels[far] = empty
        counts[empty] += 1
    return counts


def kmeans(vectors: np.ndarray, k: int, config: ClusteringConfig | None = None) -> Clustering:
    """Best of ``config.restarts`` Lloyd's runs by inertia; no empty clusters."""
    config = config or ClusteringConfig()
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2:
        raise ValidationError("kmeans expects a 2-d array of vectors")
    if k < 1 or k > vectors.shape[0]:
        raise ValidationError(f"k={k} outside 1..{vectors.shape[0]}")
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, k]))
    best: Clustering | None = None
    for _ in range(config.restarts):
        run = _lloyd(vectors, k, rng, config)
        if best is None or run.inertia < best.inertia:
            best = run
    assert best is not None
    return best


def silhouette(vectors: np.ndarray, assignments: np.ndarray) -> float:
    """Mean Silhouette over points, Euclidean distance; singleton points score 0."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(assignments)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValidationError("silhouette needs at least 2 clusters")
    return _silhouette_from_distances(cdist(vectors, vectors), labels)


def _silhouette_from_distances(dist: np.ndarray, labels: np.ndarray) -> float:
    uniq, dense = np.unique(labels, return_inverse=True)
    k = uniq.size
    n = dist.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), dense] = 1.0
    cluster_sums = dist @ onehot  # (n, k): total distance from each point to each cluster
    counts = onehot.sum(axis=0)
    own = counts[dense]
    scores = np.zeros(n)
    multi = own > 1
    a = np.zeros(n)
    a[multi] = cluster_sums[np.arange(n), dense][multi] / (own[multi] - 1)
    mean_other = cluster_sums / counts[None, :]
    mean_other[np.arange(n), dense] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    valid = multi & (denom > 0)
    scores[valid] = (b[valid] - a[valid]) / denom[valid]
    return float(scores.mean())


@dataclass
class ClusteringSelection:
    """Outcome of the cluster-count sweep; ``clustering is None`` signals fallback."""

    clustering: Clustering | None
    score: float
    per_k_scores: dict[int, float]

    @property
    def is_fallback(self) -> bool:
        return self.clustering is None


def select_clustering(vectors: np.ndarray, config: ClusteringConfig | None = None) -> ClusteringSelection:
    """Sweep k from k_min to min(k_max, n), pick the highest Silhouette score.

    Ties go to the smaller k. If no clustering scores above zero, returns the
    fallback signal meaning "treat all points as direct leaf children".
    """
    config = config or ClusteringConfig()
    vectors = np.asarray(vectors, dtype=np.float64)
    n = vectors.shape[0]
    if n < 2:
        raise ValidationError("select_clustering needs at least 2 vectors")
    pairwise = cdist(vectors, vectors)
    best: Clustering | None = None
    best_score = 0.0
    per_k: dict[int, float] = {}
    for k in range(config.k_min, min(config.k_max, n) + 1):
        run = kmeans(vectors, k, config)
        score = _silhouette_from_distances(pairwise, run.assignments)
        per_k[k] = score
        if score > best_score:
            best, best_score = run, score
    return ClusteringSelection(clustering=best, score=best_score, per_k_scores=per_k)
