import math

import numpy as np
import pytest

from skewlearn import (
    SparseVector,
    rbf_kernel,
    svdd_detect,
    svdd_fit,
    svdd_per_feature,
)
from skewlearn.svdd import center_estimation_error, write_detection_csv
from synth import gaussian_cluster_rows, random_sparse_vector


def sv(values):
    return SparseVector.from_dense(np.asarray(values, dtype=np.float64))


def double_loop_distances(train, test, sigma):
    """Independent oracle: every kernel entry via explicit pairwise loops."""
    m = len(train)
    grand = 0.0
    for a in train:
        for b in train:
            grand += rbf_kernel(a, b, sigma)
    grand /= m * m
    out = []
    for t in test:
        total = sum(rbf_kernel(t, b, sigma) for b in train)
        out.append(1.0 - 2.0 * total / m + grand)
    return np.array(out), grand


class TestRbfKernel:
    def test_self_similarity(self):
        x = sv([1.0, 2.0])
        assert rbf_kernel(x, x) == 1.0

    def test_unit_exponent(self):
        x = sv([0.0, 0.0])
        z = sv([math.sqrt(2.0), 0.0])  # squared distance = 2 sigma^2 at sigma 1
        assert rbf_kernel(x, z, 1.0) == pytest.approx(math.exp(-1.0))

    def test_vanishes_at_distance(self):
        x = sv([0.0, 0.0])
        z = sv([100.0, 0.0])
        assert rbf_kernel(x, z, 1.0) < 1e-300 or rbf_kernel(x, z, 1.0) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(60)
        for _ in range(50):
            a = random_sparse_vector(rng, 8, 4)
            b = random_sparse_vector(rng, 8, 4)
            assert rbf_kernel(a, b, 2.0) == rbf_kernel(b, a, 2.0)

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            rbf_kernel(sv([1.0]), sv([1.0]), 0.0)


class TestEstimationError:
    def test_shrinks_with_sample_size(self):
        assert center_estimation_error(400, 0.01) < center_estimation_error(100, 0.01)

    def test_grows_with_confidence(self):
        assert center_estimation_error(100, 0.001) > center_estimation_error(100, 0.1)

    def test_delta_domain(self):
        with pytest.raises(ValueError):
            center_estimation_error(10, 0.0)
        with pytest.raises(ValueError):
            center_estimation_error(10, 1.0)


class TestFit:
    def test_identical_points_have_zero_distance(self):
        rows = [sv([2.0, 3.0])] * 8
        model = svdd_fit(rows)
        assert np.allclose(model.train_dist_sq, 0.0, atol=1e-12)
        assert model.threshold == pytest.approx(center_estimation_error(8, 0.01))

    def test_single_point(self):
        model = svdd_fit([sv([1.0, -1.0])])
        assert model.train_dist_sq[0] == pytest.approx(0.0, abs=1e-12)

    def test_empty_training_set(self):
        with pytest.raises(ValueError):
            svdd_fit([])

    def test_matches_double_loop_oracle(self):
        rows = gaussian_cluster_rows(100, seed=61, std=1.0)
        model = svdd_fit(rows, sigma=1.0, delta=0.01)
        oracle_dist, oracle_grand = double_loop_distances(rows, rows, 1.0)
        assert model.kernel_grand_mean == pytest.approx(oracle_grand, abs=1e-12)
        assert np.abs(model.train_dist_sq - oracle_dist).max() <= 1e-12
        expected_threshold = oracle_dist.max() + center_estimation_error(100, 0.01)
        assert model.threshold == pytest.approx(expected_threshold, abs=1e-12)

    def test_distances_numerically_nonnegative(self):
        rows = gaussian_cluster_rows(60, seed=62, std=0.5)
        model = svdd_fit(rows)
        assert (model.train_dist_sq >= -1e-12).all()


class TestDetect:
    def test_training_row_never_flagged(self):
        rows = gaussian_cluster_rows(50, seed=63, std=0.2)
        model = svdd_fit(rows)
        result = svdd_detect(model, rows)
        assert result.flagged_indices.size == 0

    def test_distant_point_flagged(self):
        rows = gaussian_cluster_rows(80, seed=64, std=0.1)
        model = svdd_fit(rows)
        outlier = sv([1.0, 0.0])  # ten data-sigmas from the center
        result = svdd_detect(model, [outlier])
        oracle_dist, _ = double_loop_distances(rows, [outlier], 1.0)
        assert result.distances_sq[0] == pytest.approx(oracle_dist[0], abs=1e-12)
        assert oracle_dist[0] > model.threshold
        assert result.flagged_indices.tolist() == [0]

    def test_empty_test_set(self):
        model = svdd_fit(gaussian_cluster_rows(10, seed=65))
        result = svdd_detect(model, [])
        assert result.flagged_indices.size == 0
        assert result.distances_sq.size == 0

    def test_flagged_set_is_exact(self):
        rows = gaussian_cluster_rows(60, seed=66, std=0.3)
        test = gaussian_cluster_rows(40, seed=67, std=1.5)
        model = svdd_fit(rows)
        result = svdd_detect(model, test)
        expected = np.nonzero(result.distances_sq > model.threshold)[0]
        assert np.array_equal(result.flagged_indices, expected)

    def test_radial_monotonicity(self):
        rows = gaussian_cluster_rows(80, seed=68, std=0.2)
        model = svdd_fit(rows)
        direction = np.array([0.6, 0.8])
        radii = np.linspace(0.0, 4.0, 30)
        points = [sv(r * direction) for r in radii]
        dist = svdd_detect(model, points).distances_sq
        assert (np.diff(dist) >= -1e-12).all()

    def test_unseen_feature_contributes_distance(self):
        rows = [sv([1.0, 0.0]), sv([0.9, 0.1])]
        model = svdd_fit(rows)
        far = SparseVector(np.array([5], np.int64), np.array([3.0]))
        near = sv([0.95, 0.05])
        d = svdd_detect(model, [far, near]).distances_sq
        assert d[0] > d[1]


class TestKernelMatrixProperties:
    def test_positive_semidefinite(self):
        rng = np.random.default_rng(69)
        for _ in range(10):
            rows = [random_sparse_vector(rng, 6, 4) for _ in range(12)]
            gram = np.array([[rbf_kernel(a, b, 1.5) for b in rows] for a in rows])
            eigenvalues = np.linalg.eigvalsh((gram + gram.T) / 2)
            assert eigenvalues.min() >= -1e-10


class TestPerFeature:
    def test_independent_channels(self):
        rng = np.random.default_rng(70)
        train = [sv([v, 0.0]) for v in rng.normal(0, 0.1, size=30)]
        test = [sv([0.0, 0.0]), sv([5.0, 0.0])]
        results = svdd_per_feature(train, test)
        assert set(results) == {0}
        assert results[0].flagged_indices.tolist() == [1]


class TestCsv:
    def test_format(self, tmp_path):
        model = svdd_fit(gaussian_cluster_rows(20, seed=71, std=0.1))
        result = svdd_detect(model, [sv([0.0, 0.0]), sv([9.0, 9.0])])
        path = tmp_path / "det.csv"
        write_detection_csv(result, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "row_index,distance_sq,flagged"
        assert lines[1].startswith("0,") and lines[1].endswith(",0")
        assert lines[2].startswith("1,") and lines[2].endswith(",1")
