import itertools

import numpy as np
import pytest

from stationprint.cluster import (
    ClusterModel,
    assign,
    assign_batch,
    fit_kmeans,
    load_cluster_model,
    save_cluster_model,
    select_k,
    silhouette,
)
from stationprint.errors import DegenerateInputError, ShapeError


def exhaustive_inertia(points, n):
    """Brute-force optimum over every assignment of points to n clusters."""
    best = np.inf
    for labels in itertools.product(range(n), repeat=len(points)):
        if len(set(labels)) < n:
            continue
        total = 0.0
        arr = np.array(labels)
        for c in range(n):
            members = points[arr == c]
            total += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return best


def planted_blobs(n_clusters, per_cluster, dim, seed, spread=0.05, box=10.0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box, box, size=(n_clusters, dim))
    points = np.concatenate(
        [c + spread * rng.normal(size=(per_cluster, dim)) for c in centers]
    )
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    return points, labels


class TestFitKmeans:
    def test_square_corners_matches_enumeration(self):
        square = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        model, labels = fit_kmeans(square, 2, seed=0)
        assert model.inertia == pytest.approx(exhaustive_inertia(square, 2))
        assert model.inertia == pytest.approx(1.0)

    def test_each_point_its_own_centroid(self):
        points = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]])
        model, labels = fit_kmeans(points, 3, seed=1)
        assert model.inertia == pytest.approx(0.0)
        assert sorted(labels.tolist()) == [0, 1, 2]

    def test_planted_five_gaussians_recovered(self):
        points, truth = planted_blobs(5, 60, 8, seed=2)
        model, labels = fit_kmeans(points, 5, seed=0)
        agreements = 0
        for c in range(5):
            found, counts = np.unique(labels[truth == c], return_counts=True)
            agreements += counts.max()
        assert agreements >= 0.99 * len(points)

    def test_too_few_distinct_points(self):
        points = np.tile(np.array([[1.0, 2.0]]), (5, 1))
        with pytest.raises(DegenerateInputError):
            fit_kmeans(points, 2, seed=0)

    def test_deterministic_given_seed(self):
        points, _ = planted_blobs(3, 20, 4, seed=5)
        m1, l1 = fit_kmeans(points, 3, seed=7)
        m2, l2 = fit_kmeans(points, 3, seed=7)
        np.testing.assert_array_equal(m1.centroids, m2.centroids)
        np.testing.assert_array_equal(l1, l2)


class TestAssign:
    @pytest.fixture
    def model(self):
        centroids = np.arange(20.0).reshape(10, 2)
        return ClusterModel(centroids=centroids, inertia=0.0, seed=0)

    def test_exact_centroid(self, model):
        assert assign(model, model.centroids[7]) == 7

    def test_tie_breaks_to_lowest_index(self):
        centroids = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]])
        model = ClusterModel(centroids=centroids, inertia=0.0, seed=0)
        # equidistant to centroids 1 and 2
        assert assign(model, np.array([0.0, 5.0])) == 1

    def test_matches_linear_scan(self, model):
        rng = np.random.default_rng(3)
        points = rng.uniform(-5, 25, size=(200, 2))
        for p in points:
            expected = int(np.argmin([np.linalg.norm(p - c) for c in model.centroids]))
            assert assign(model, p) == expected
        np.testing.assert_array_equal(
            assign_batch(model, points), [assign(model, p) for p in points]
        )

    def test_dimension_mismatch(self, model):
        with pytest.raises(ShapeError):
            assign(model, np.zeros(3))


class TestSilhouette:
    def test_two_tight_blobs_score_high(self):
        points, labels = planted_blobs(2, 50, 4, seed=1, spread=0.01, box=20.0)
        assert silhouette(points, labels) > 0.9

    def test_random_labels_score_near_zero(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            points = rng.normal(size=(120, 5))
            labels = rng.integers(0, 3, size=120)
            if len(set(labels.tolist())) < 2:
                continue
            assert abs(silhouette(points, labels)) < 0.1

    def test_b_equals_a_gives_zero(self):
        # every point identical: a = b = 0, convention scores 0
        points = np.zeros((4, 3))
        labels = np.array([0, 0, 1, 1])
        assert silhouette(points, labels) == 0.0

    def test_singleton_cluster_contributes_zero(self):
        points = np.array([[0.0], [0.1], [9.0]])
        labels = np.array([0, 0, 1])
        # singleton contributes 0; pair members score (b - a) / b
        expected = np.mean([(9.0 - 0.1) / 9.0, (8.9 - 0.1) / 8.9, 0.0])
        assert silhouette(points, labels) == pytest.approx(expected)

    def test_subsampling_is_deterministic(self):
        points, labels = planted_blobs(3, 200, 3, seed=4)
        s1 = silhouette(points, labels, sample_cap=100, seed=9)
        s2 = silhouette(points, labels, sample_cap=100, seed=9)
        assert s1 == s2

    def test_single_cluster_rejected(self):
        with pytest.raises(DegenerateInputError):
            silhouette(np.zeros((10, 2)), np.zeros(10, dtype=int))


class TestSelectK:
    def test_singleton_range(self):
        points, _ = planted_blobs(3, 30, 4, seed=0)
        best, scores = select_k(points, k_min=3, k_max=3, seed=0)
        assert best == 3
        assert list(scores) == [3]

    def test_planted_eleven_over_default_range(self):
        # mirrors the silhouette peak at 11 over the 9..16 sweep
        points, _ = planted_blobs(11, 40, 16, seed=123, spread=0.05)
        best, scores = select_k(points, seed=0)
        assert set(scores) == set(range(9, 17))
        assert best == 11

    def test_permutation_invariant(self):
        points, _ = planted_blobs(4, 25, 5, seed=8)
        best1, scores1 = select_k(points, k_min=3, k_max=6, seed=1)
        shuffled = points[np.random.default_rng(99).permutation(len(points))]
        best2, scores2 = select_k(shuffled, k_min=3, k_max=6, seed=1)
        assert best1 == best2
        assert scores1 == scores2

    def test_ids_define_canonical_order(self):
        points, _ = planted_blobs(3, 20, 4, seed=3)
        ids = [f"s{i:04d}" for i in range(len(points))]
        perm = np.random.default_rng(5).permutation(len(points))
        best1, scores1 = select_k(points, k_min=2, k_max=4, seed=0, ids=ids)
        best2, scores2 = select_k(
            points[perm], k_min=2, k_max=4, seed=0, ids=[ids[i] for i in perm]
        )
        assert (best1, scores1) == (best2, scores2)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        points, _ = planted_blobs(3, 20, 6, seed=0)
        model, _ = fit_kmeans(points, 3, seed=2)
        path = tmp_path / "clusters.bin"
        save_cluster_model(model, path)
        loaded = load_cluster_model(path)
        np.testing.assert_array_equal(loaded.centroids, model.centroids)
        assert loaded.inertia == model.inertia
        assert loaded.seed == model.seed
