import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divergauge.features import EmbeddingMatrix, SimilarityMatrix, embedding_kernel
from divergauge.metrics import (
    MauveLiteConfig,
    divergence_frontier_area,
    improved_precision_recall,
    mauve_lite,
    paired_ttest_one_tailed,
    truncated_entropy,
    vendi_score,
)

from oracles import brute_precision_recall, student_t_upper_tail_quad


def emb(values, prefix="s"):
    values = np.asarray(values, dtype=float)
    return EmbeddingMatrix(ids=tuple(f"{prefix}{i}" for i in range(len(values))), values=values)


class TestVendiScore:
    def test_all_ones_kernel(self):
        assert vendi_score(SimilarityMatrix(np.ones((4, 4)))).value == pytest.approx(1.0, abs=1e-8)

    def test_identity_kernel(self):
        assert vendi_score(SimilarityMatrix(np.eye(4))).value == pytest.approx(4.0, abs=1e-8)

    def test_hand_two_sample_case(self):
        # K/2 has eigenvalues {0.75, 0.25}; VS = exp(-(0.75 ln 0.75 + 0.25 ln 0.25))
        k = SimilarityMatrix(np.array([[1.0, 0.5], [0.5, 1.0]]))
        expected = math.exp(-(0.75 * math.log(0.75) + 0.25 * math.log(0.25)))
        assert vendi_score(k).value == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(1.7548, abs=1e-4)

    def test_rejects_non_psd(self):
        k = SimilarityMatrix(np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]]))
        with pytest.raises(ValueError, match="not PSD"):
            vendi_score(k)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((8, 5))
        k = embedding_kernel(emb(x))
        perm = rng.permutation(8)
        k_perm = SimilarityMatrix(k.matrix[np.ix_(perm, perm)])
        assert vendi_score(k_perm).value == pytest.approx(vendi_score(k).value, abs=1e-9)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=30, deadline=None)
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 12))
        x = rng.standard_normal((n, 6))
        v = vendi_score(embedding_kernel(emb(x))).value
        assert 1.0 - 1e-8 <= v <= n + 1e-8


class TestTruncatedEntropy:
    def test_identical_rows_floor(self):
        n, floor = 5, 1e-10
        e = emb(np.tile([1.0, 2.0, 3.0], (n, 1)))
        expected = 0.5 * n * math.log(2 * math.pi * math.e) + 0.5 * n * math.log(floor)
        assert truncated_entropy(e).value == pytest.approx(expected, abs=1e-9)

    def test_hand_two_points(self):
        # covariance eigenvalues {2, 0 -> floor}
        e = emb([[0.0, 0.0], [2.0, 0.0]])
        expected = math.log(2 * math.pi * math.e) + 0.5 * (math.log(2.0) + math.log(1e-10))
        assert truncated_entropy(e).value == pytest.approx(expected, abs=1e-9)

    def test_rotation_invariant(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((20, 16))
        q, _ = np.linalg.qr(rng.standard_normal((16, 16)))
        assert truncated_entropy(emb(x @ q)).value == pytest.approx(
            truncated_entropy(emb(x)).value, abs=1e-6
        )

    def test_translation_invariant(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((10, 8))
        shift = rng.standard_normal(8) * 50.0
        assert truncated_entropy(emb(x + shift)).value == pytest.approx(
            truncated_entropy(emb(x)).value, abs=1e-6
        )

    def test_rejects_single_row(self):
        with pytest.raises(ValueError, match="at least 2"):
            truncated_entropy(emb([[1.0, 2.0]]))


class TestImprovedPrecisionRecall:
    def test_self_coverage(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((10, 2))
        pr = improved_precision_recall(emb(x, "g"), emb(x, "r"))
        assert pr.precision == 1.0 and pr.recall == 1.0

    def test_disjoint_supports(self):
        rng = np.random.default_rng(4)
        gen = rng.standard_normal((10, 2))
        ref = rng.standard_normal((10, 2)) + 1000.0
        pr = improved_precision_recall(emb(gen, "g"), emb(ref, "r"))
        assert pr.precision == 0.0 and pr.recall == 0.0

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        gen = rng.standard_normal((100, 2))
        ref = rng.standard_normal((100, 2)) * 1.5 + 0.5
        pr = improved_precision_recall(emb(gen, "g"), emb(ref, "r"), k=3)
        want_p, want_r = brute_precision_recall(gen, ref, k=3)
        assert pr.precision == want_p
        assert pr.recall == want_r

    def test_swap_symmetry(self):
        rng = np.random.default_rng(6)
        gen = rng.standard_normal((20, 3))
        ref = rng.standard_normal((25, 3))
        a = improved_precision_recall(emb(gen, "g"), emb(ref, "r"))
        b = improved_precision_recall(emb(ref, "r"), emb(gen, "g"))
        assert a.precision == b.recall
        assert a.recall == b.precision

    def test_rigid_motion_invariant(self):
        rng = np.random.default_rng(7)
        gen = rng.standard_normal((15, 3))
        ref = rng.standard_normal((18, 3))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        shift = rng.standard_normal(3) * 10.0
        a = improved_precision_recall(emb(gen, "g"), emb(ref, "r"))
        b = improved_precision_recall(emb(gen @ q + shift, "g"), emb(ref @ q + shift, "r"))
        assert (a.precision, a.recall) == (b.precision, b.recall)

    def test_rejects_small_sets(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ValueError, match="more than k"):
            improved_precision_recall(emb(rng.standard_normal((3, 2)), "g"), emb(rng.standard_normal((9, 2)), "r"), k=3)


class TestMauveLite:
    def test_identical_sets(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((40, 4))
        assert mauve_lite(emb(x, "g"), emb(x, "r")).value >= 0.99

    def test_disjoint_sets(self):
        rng = np.random.default_rng(10)
        gen = rng.standard_normal((50, 4))
        ref = rng.standard_normal((50, 4)) + 500.0
        assert mauve_lite(emb(gen, "g"), emb(ref, "r")).value <= 0.05

    def test_hand_histograms_collapse_to_area_one(self):
        # KL = 0 both ways -> every frontier point is (1, 1) -> area 1
        p = np.array([0.5, 0.5])
        assert divergence_frontier_area(p, p) == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_flag(self):
        x = np.ones((20, 3))
        m = mauve_lite(emb(x, "g"), emb(x, "r"))
        assert m.value == 1.0 and m.degenerate

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        gen = rng.standard_normal((60, 4))
        ref = rng.standard_normal((60, 4)) + 0.8
        a = mauve_lite(emb(gen, "g"), emb(ref, "r")).value
        b = mauve_lite(emb(ref, "r"), emb(gen, "g")).value
        assert a == pytest.approx(b, abs=0.01)

    def test_score_range(self):
        rng = np.random.default_rng(12)
        for shift in (0.0, 1.0, 5.0, 50.0):
            gen = rng.standard_normal((40, 3))
            ref = rng.standard_normal((40, 3)) + shift
            v = mauve_lite(emb(gen, "g"), emb(ref, "r")).value
            assert 0.0 < v <= 1.0

    def test_rejects_too_few_points(self):
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError, match="combined points"):
            mauve_lite(
                emb(rng.standard_normal((5, 2)), "g"),
                emb(rng.standard_normal((5, 2)), "r"),
                MauveLiteConfig(clusters=8),
            )


class TestPairedTTest:
    def test_null_case(self):
        r = paired_ttest_one_tailed([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert r.t == 0.0 and r.p_value == 0.5

    def test_zero_variance_positive_mean(self):
        r = paired_ttest_one_tailed([2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0])
        assert r.degenerate and r.p_value == 0.0

    def test_hand_case(self):
        # d = (1,2,3): t = 2 / (1/sqrt(3)) = 3.4641, df = 2
        r = paired_ttest_one_tailed([2.0, 4.0, 6.0], [1.0, 2.0, 3.0])
        assert r.t == pytest.approx(2.0 * math.sqrt(3.0), abs=1e-10)
        assert r.df == 2
        assert r.p_value == pytest.approx(0.0371, abs=1e-4)

    def test_rejects_mismatched_or_short(self):
        with pytest.raises(ValueError):
            paired_ttest_one_tailed([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            paired_ttest_one_tailed([1.0], [2.0])

    def test_negative_t_tail(self):
        r = paired_ttest_one_tailed([1.0, 2.0, 3.0], [5.0, 6.0, 9.0])
        assert r.t < 0
        assert r.p_value > 0.5
        assert r.p_value == pytest.approx(student_t_upper_tail_quad(r.t, r.df), abs=1e-6)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_matches_quadrature_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 61))
        a = rng.standard_normal(n)
        b = rng.standard_normal(n) - rng.uniform(0, 0.5)
        r = paired_ttest_one_tailed(a, b)
        assert r.p_value == pytest.approx(student_t_upper_tail_quad(r.t, r.df), abs=1e-6)
