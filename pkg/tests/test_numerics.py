import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divergauge.numerics import (
    PointSet,
    SymMatrix,
    covariance_spectrum,
    kmeans,
    knn_radii,
    sym_eigendecompose,
)

from oracles import brute_knn_radii, charpoly_eigenvalues


def random_symmetric(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return (a + a.T) / 2.0


class TestSymEigendecompose:
    def test_identity(self):
        spec = sym_eigendecompose(SymMatrix(np.eye(3)))
        np.testing.assert_allclose(spec.eigenvalues, [1.0, 1.0, 1.0], atol=1e-12)

    def test_two_by_two_hand_case(self):
        # char poly (2-l)^2 - 1 = 0 -> l in {3, 1}
        spec = sym_eigendecompose(SymMatrix(np.array([[2.0, 1.0], [1.0, 2.0]])))
        np.testing.assert_allclose(spec.eigenvalues, [3.0, 1.0], atol=1e-10)

    def test_matches_charpoly_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            a = random_symmetric(rng, 5)
            got = sym_eigendecompose(SymMatrix(a), want_vectors=False).eigenvalues
            want = charpoly_eigenvalues(a)
            np.testing.assert_allclose(got, want, atol=1e-8)

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        a = random_symmetric(rng, 12, scale=3.0)
        spec = sym_eigendecompose(SymMatrix(a))
        rec = spec.eigenvectors @ np.diag(spec.eigenvalues) @ spec.eigenvectors.T
        assert np.linalg.norm(rec - a) / np.linalg.norm(a) < 1e-8

    def test_rejects_non_finite(self):
        a = np.eye(3)
        a[1, 2] = a[2, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            SymMatrix(a)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="not symmetric"):
            SymMatrix(np.array([[1.0, 2.0], [3.0, 1.0]]))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_permutation_equivariant(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        a = random_symmetric(rng, n)
        perm = rng.permutation(n)
        before = sym_eigendecompose(SymMatrix(a), want_vectors=False).eigenvalues
        after = sym_eigendecompose(SymMatrix(a[np.ix_(perm, perm)]), want_vectors=False).eigenvalues
        np.testing.assert_allclose(before, after, atol=1e-9)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_psd_unit_diagonal_eigensum(self, seed):
        # unit diagonal => trace K/N = 1 => eigenvalues of K/N sum to 1
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        x = rng.standard_normal((n, 4))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        k = x @ x.T
        k = (k + k.T) / 2.0
        np.fill_diagonal(k, 1.0)
        vals = sym_eigendecompose(SymMatrix(k / n), want_vectors=False).eigenvalues
        assert abs(vals.sum() - 1.0) < 1e-8


class TestCovarianceSpectrum:
    def test_identical_rows(self):
        vals = covariance_spectrum(np.array([[3.0, 1.0], [3.0, 1.0]])).eigenvalues
        np.testing.assert_allclose(vals, [0.0, 0.0], atol=1e-12)

    def test_hand_two_points(self):
        # rows (0,0),(2,0): variance 2 along x with divisor N-1=1
        vals = covariance_spectrum(np.array([[0.0, 0.0], [2.0, 0.0]])).eigenvalues
        np.testing.assert_allclose(vals, [2.0, 0.0], atol=1e-12)

    def test_gram_trick_matches_direct_covariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 100))
        got = covariance_spectrum(x).eigenvalues
        centered = x - x.mean(axis=0)
        direct = np.sort(np.linalg.eigvalsh(centered.T @ centered / 3.0))[::-1][:4]
        np.testing.assert_allclose(got, direct, atol=1e-8)

    def test_rejects_single_row(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            covariance_spectrum(np.ones((1, 5)))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=20, deadline=None)
    def test_rotation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((6, 9))
        q, _ = np.linalg.qr(rng.standard_normal((9, 9)))
        before = covariance_spectrum(x).eigenvalues
        after = covariance_spectrum(x @ q).eigenvalues
        np.testing.assert_allclose(before, after, atol=1e-7)


class TestKnnRadii:
    def test_collinear_hand_case(self):
        pts = PointSet(np.array([[0.0], [1.0], [3.0]]))
        np.testing.assert_allclose(knn_radii(pts, 1), [1.0, 1.0, 2.0])

    def test_identical_points(self):
        pts = PointSet(np.zeros((4, 2)))
        np.testing.assert_allclose(knn_radii(pts, 1), np.zeros(4))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        pts = rng.standard_normal((50, 2))
        got = knn_radii(PointSet(pts), 3)
        want = brute_knn_radii(pts, 3)
        assert np.array_equal(got, want)

    def test_matches_brute_force_at_500(self):
        # upper end of the exactness contract
        rng = np.random.default_rng(12)
        pts = rng.standard_normal((500, 3))
        assert np.array_equal(knn_radii(PointSet(pts), 3), brute_knn_radii(pts, 3))

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=15, deadline=None)
    def test_matches_brute_force_any_size(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        k = int(rng.integers(1, n))
        pts = rng.standard_normal((n, 3))
        assert np.array_equal(knn_radii(PointSet(pts), k), brute_knn_radii(pts, k))

    def test_rejects_k_too_large(self):
        with pytest.raises(ValueError, match="smaller than"):
            knn_radii(PointSet(np.zeros((3, 1))), 3)


class TestKMeans:
    def test_separated_blobs(self):
        rng = np.random.default_rng(0)
        blob_a = rng.standard_normal((30, 2)) * 0.1
        blob_b = rng.standard_normal((30, 2)) * 0.1 + 100.0
        pts = PointSet(np.vstack([blob_a, blob_b]))
        assign, _, _ = kmeans(pts, 2, seed=1)
        assert len(set(assign[:30])) == 1
        assert len(set(assign[30:])) == 1
        assert assign[0] != assign[30]

    def test_saturated(self):
        rng = np.random.default_rng(1)
        pts = PointSet(rng.standard_normal((6, 2)))
        assign, centers, inertia = kmeans(pts, 6, seed=9)
        assert sorted(assign) == list(range(6))
        assert inertia == pytest.approx(0.0, abs=1e-18)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        pts = PointSet(rng.standard_normal((40, 3)))
        a1, c1, i1 = kmeans(pts, 5, seed=1234)
        a2, c2, i2 = kmeans(pts, 5, seed=1234)
        assert np.array_equal(a1, a2)
        assert np.array_equal(c1, c2)
        assert i1 == i2

    def test_labels_in_range(self):
        rng = np.random.default_rng(3)
        pts = PointSet(rng.standard_normal((25, 2)))
        assign, _, _ = kmeans(pts, 4, seed=0)
        assert set(assign) <= set(range(4))

    def test_rejects_too_many_clusters(self):
        with pytest.raises(ValueError, match="exceeds"):
            kmeans(PointSet(np.zeros((3, 2))), 4, seed=0)
