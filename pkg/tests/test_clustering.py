from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

import captree.clustering as clustering_mod
from captree.clustering import ClusteringConfig, kmeans, select_clustering, silhouette
from captree.core import ValidationError

from conftest import random_unit_vectors


def brute_force_best_inertia(points: np.ndarray, k: int) -> float:
    """Exhaustive minimum inertia over all k-partitions (tiny inputs only)."""
    n = len(points)
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        if len(set(labels)) != k:
            continue
        inertia = 0.0
        for cluster in range(k):
            members = points[[i for i in range(n) if labels[i] == cluster]]
            inertia += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, inertia)
    return float(best)


def reference_silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Plain per-point definition, written independently of the library."""
    scores = []
    for i in range(len(points)):
        own = [j for j in range(len(points)) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = np.mean([np.linalg.norm(points[i] - points[j]) for j in own])
        b = np.inf
        for other in set(labels) - {labels[i]}:
            members = [j for j in range(len(points)) if labels[j] == other]
            b = min(b, np.mean([np.linalg.norm(points[i] - points[j]) for j in members]))
        denom = max(a, b)
        scores.append(0.0 if denom == 0 else (b - a) / denom)
    return float(np.mean(scores))


class TestKmeans:
    def test_square_corners_match_exhaustive_partition_optimum(self):
        points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        result = kmeans(points, 2, ClusteringConfig(seed=0))
        assert result.inertia == pytest.approx(brute_force_best_inertia(points, 2))
        labels = result.assignments
        assert labels[0] == labels[1] and labels[2] == labels[3] and labels[0] != labels[2]

    def test_k_equals_n_gives_zero_inertia(self):
        points = random_unit_vectors(6, 5, seed=1)
        result = kmeans(points, 6, ClusteringConfig(seed=0))
        assert result.inertia == pytest.approx(0.0)
        assert sorted(result.assignments) == list(range(6))

    def test_identical_points_reseed_empty_cluster(self):
        points = np.ones((5, 3))
        result = kmeans(points, 2, ClusteringConfig(seed=0))
        assert result.inertia == pytest.approx(0.0)
        assert result.centroids.shape == (2, 3)

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValidationError):
            kmeans(np.ones((3, 2)), 4)

    def test_deterministic_under_seed(self):
        points = random_unit_vectors(40, 8, seed=2)
        first = kmeans(points, 4, ClusteringConfig(seed=9))
        second = kmeans(points, 4, ClusteringConfig(seed=9))
        np.testing.assert_array_equal(first.assignments, second.assignments)
        np.testing.assert_array_equal(first.centroids, second.centroids)

    @given(
        n=st.integers(min_value=3, max_value=12),
        k=st.integers(min_value=1, max_value=4),
        seed=st.integers(min_value=0, max_value=1000),
    )
    def test_no_empty_clusters_ever(self, n, k, seed):
        k = min(k, n)
        points = random_unit_vectors(n, 4, seed=seed)
        result = kmeans(points, k, ClusteringConfig(seed=seed, restarts=2))
        assert set(result.assignments) == set(range(k))

    def test_small_exhaustive_agreement_with_restarts(self):
        # with enough restarts the heuristic lands on the global optimum here
        points = random_unit_vectors(7, 3, seed=5)
        result = kmeans(points, 3, ClusteringConfig(seed=1, restarts=25))
        assert result.inertia == pytest.approx(brute_force_best_inertia(points, 3), rel=1e-9)


class TestSilhouette:
    def test_two_tight_far_pairs_score_high(self):
        points = np.array([[0.0, 0.0], [0.0, 0.1], [10.0, 0.0], [10.0, 0.1]])
        labels = np.array([0, 0, 1, 1])
        score = silhouette(points, labels)
        assert score > 0.9
        assert score == pytest.approx(reference_silhouette(points, labels), abs=1e-12)

    def test_interleaved_collinear_points_score_negative(self):
        # hand computation: scores per point are (0, -0.5, -0.5, 0) -> mean -0.25
        points = np.array([[0.0], [1.0], [2.0], [3.0]])
        labels = np.array([0, 1, 0, 1])
        assert silhouette(points, labels) == pytest.approx(-0.25)

    def test_two_singletons_score_zero(self):
        points = np.array([[0.0, 0.0], [3.0, 4.0]])
        assert silhouette(points, np.array([0, 1])) == 0.0

    def test_single_cluster_rejected(self):
        with pytest.raises(ValidationError):
            silhouette(np.ones((4, 2)), np.zeros(4, dtype=int))

    @given(
        n=st.integers(min_value=4, max_value=14),
        k=st.integers(min_value=2, max_value=4),
        seed=st.integers(min_value=0, max_value=500),
    )
    def test_matches_reference_and_stays_bounded(self, n, k, seed):
        points = random_unit_vectors(n, 3, seed=seed)
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, k, size=n)
        if len(set(labels.tolist())) < 2:
            labels[0] = (labels[0] + 1) % k
        score = silhouette(points, labels)
        assert -1.0 <= score <= 1.0
        assert score == pytest.approx(reference_silhouette(points, labels), abs=1e-10)


class TestSelectClustering:
    @staticmethod
    def blobs(counts, centers, spread, seed, dim=6):
        rng = np.random.default_rng(seed)
        rows = []
        for count, center in zip(counts, centers):
            rows.append(center + spread * rng.standard_normal((count, dim)))
        return np.concatenate(rows)

    def test_three_separated_blobs_select_three(self):
        centers = [np.zeros(6), np.full(6, 8.0), np.concatenate([np.full(3, -8.0), np.zeros(3)])]
        points = self.blobs([10, 10, 10], centers, spread=0.2, seed=4)
        config = ClusteringConfig(seed=0)
        selection = select_clustering(points, config)
        assert not selection.is_fallback
        assert selection.clustering.k == 3

        # independent oracle: rerun kmeans per k, score with the reference
        # implementation, take the argmax with the smaller-k tie-break
        best_k, best_score = None, 0.0
        for k in range(2, min(10, len(points)) + 1):
            run = kmeans(points, k, config)
            score = reference_silhouette(points, run.assignments)
            if score > best_score:
                best_k, best_score = k, score
        assert selection.clustering.k == best_k
        assert selection.score == pytest.approx(best_score, abs=1e-10)

    def test_tie_breaks_to_smaller_k(self, monkeypatch):
        scripted = {2: 0.4, 3: 0.4, 4: 0.39}

        def fake_silhouette(dist, labels):
            return scripted[len(set(labels.tolist()))]

        monkeypatch.setattr(clustering_mod, "_silhouette_from_distances", fake_silhouette)
        points = random_unit_vectors(12, 4, seed=0)
        selection = select_clustering(points, ClusteringConfig(k_max=4, seed=0))
        assert selection.clustering.k == 2

    def test_identical_vectors_signal_fallback(self):
        points = np.ones((5, 4))
        selection = select_clustering(points, ClusteringConfig(seed=0))
        assert selection.is_fallback
        assert selection.score == 0.0

    def test_two_points_fall_back_via_singleton_convention(self):
        points = np.array([[0.0, 0.0], [5.0, 5.0]])
        selection = select_clustering(points, ClusteringConfig(seed=0))
        assert selection.is_fallback
