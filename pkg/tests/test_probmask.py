"""Tests for probabilistic masks."""

import numpy as np
import pytest

from crossmask.errors import DegenerateMassError, ShapeMismatchError
from crossmask.fourier import chebyshev_from_dc, distance_from_dc
from crossmask.patterns import gen_center
from crossmask.probmask import (
    ProbMask,
    adjusted_mass,
    bernoulli_realize,
    sample_thresholds,
    scale_to_factor,
    soft_binarize,
    topk_extract,
)


class TestMassAndScaling:
    """Tests for adjusted_mass and scale_to_factor."""

    def test_adjusted_mass_clips_and_rectifies(self) -> None:
        """Weights are clipped to [-1, 1] before adding the prior; negatives become 0."""
        w = np.array([[3.0, -3.0], [0.2, -0.7]])
        r = np.array([[0.5, 0.5], [0.1, 0.5]])
        np.testing.assert_allclose(adjusted_mass(w, r), [[1.5, 0.0], [0.3, 0.0]])

    def test_shape_mismatch(self) -> None:
        """Weight and prior must share a shape."""
        with pytest.raises(ShapeMismatchError):
            adjusted_mass(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_mean_equals_factor(self, rng: np.random.Generator) -> None:
        """Scaled probabilities have mean R, even where entries exceed 1."""
        for factor in (0.05, 0.125, 0.25, 0.9):
            m = rng.exponential(size=(16, 16)) ** 3
            p = scale_to_factor(m, factor)
            assert p.mean == pytest.approx(factor, rel=1e-12)
            assert p.target_factor == factor
            assert np.all(p.data >= 0)

    def test_zero_mass_is_degenerate(self) -> None:
        """An identically zero mass cannot be scaled."""
        with pytest.raises(DegenerateMassError):
            scale_to_factor(np.zeros((4, 4)), 0.25)

    def test_probmask_rejects_negative(self) -> None:
        """ProbMask values must be nonnegative."""
        with pytest.raises(ValueError):
            ProbMask(data=np.array([[0.1, -0.1]]), target_factor=0.25)


class TestSoftBinarize:
    """Tests for the sigmoid relaxation."""

    def test_values(self) -> None:
        """sigmoid(sigma_p * (P - th)) with sigmoid(0) = 0.5."""
        p = np.array([[0.5, 1.0]])
        th = np.array([[0.5, 0.0]])
        out = soft_binarize(p, th, sigma_p=5.0)
        assert out[0, 0] == pytest.approx(0.5)
        assert out[0, 1] == pytest.approx(1.0 / (1.0 + np.exp(-5.0)))

    def test_accepts_probmask(self) -> None:
        """A ProbMask and its raw array give the same result."""
        p = scale_to_factor(np.arange(1.0, 17.0).reshape(4, 4), 0.25)
        th = sample_thresholds((4, 4), 3)
        np.testing.assert_array_equal(soft_binarize(p, th, 5.0), soft_binarize(p.data, th, 5.0))

    def test_invalid_sigma(self) -> None:
        """sigma_p must be positive."""
        with pytest.raises(ValueError):
            soft_binarize(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)

    def test_threshold_shape(self) -> None:
        """Threshold and probabilities must share a shape."""
        with pytest.raises(ShapeMismatchError):
            soft_binarize(np.zeros((2, 2)), np.zeros((3, 2)), 1.0)

    def test_thresholds_in_unit_interval(self) -> None:
        """Thresholds are uniform in [0, 1) and reproducible from a seed."""
        th = sample_thresholds((32, 32), 5)
        assert th.min() >= 0.0 and th.max() < 1.0
        np.testing.assert_array_equal(th, sample_thresholds((32, 32), 5))


class TestRealization:
    """Tests for Bernoulli and top-k masks."""

    def test_bernoulli_expected_count(self) -> None:
        """Average sample count is sum(min(P, 1))."""
        p = scale_to_factor(np.random.default_rng(0).random((32, 32)) ** 2, 0.25)
        counts = [bernoulli_realize(p, seed).count for seed in range(400)]
        expected = np.minimum(p.data, 1.0).sum()
        assert np.mean(counts) == pytest.approx(expected, rel=0.02)

    def test_bernoulli_saturated_entries(self) -> None:
        """Entries with P >= 1 are always sampled; zero entries never."""
        p = np.array([[2.0, 0.0], [0.0, 1.0]])
        for seed in range(20):
            mask = bernoulli_realize(p, seed)
            assert mask.data.tolist() == [[True, False], [False, True]]

    def test_topk_count(self, rng: np.random.Generator) -> None:
        """Top-k keeps exactly floor(R * M * N) entries, the largest ones."""
        p = rng.random((20, 20))
        mask = topk_extract(p, 0.1)
        assert mask.count == 40
        assert p[mask.data].min() > p[~mask.data].max()

    def test_topk_ties_prefer_dc(self) -> None:
        """Among equal probabilities the entries nearest DC win."""
        mask = topk_extract(np.ones((6, 6)), 5 / 36)
        # DC (3, 3) and its four neighbours
        expected = {(3, 3), (2, 3), (4, 3), (3, 2), (3, 4)}
        assert set(zip(*np.nonzero(mask.data), strict=True)) == expected

    def test_topk_ties_then_row_major(self) -> None:
        """Equal probability and distance fall back to row-major order."""
        mask = topk_extract(np.ones((6, 6)), 2 / 36)
        assert mask.data[3, 3] and mask.data[2, 3]
        assert mask.count == 2

    def test_topk_rejects_empty(self) -> None:
        """A factor giving zero samples is rejected."""
        with pytest.raises(ValueError):
            topk_extract(np.ones((4, 4)), 0.01)


class TestSpecialCases:
    """Limits and coincidences of the mask operators."""

    def test_sigmoid_value(self) -> None:
        """sigma_p = 5 and P - th = 1 give sigmoid(5)."""
        out = soft_binarize(np.array([[1.5]]), np.array([[0.5]]), 5.0)
        assert out[0, 0] == pytest.approx(0.993307, abs=1e-6)

    def test_sharp_limit_is_threshold(self, rng: np.random.Generator) -> None:
        """A very steep sigmoid agrees with hard thresholding away from P = th."""
        p = rng.random((32, 32))
        th = rng.random((32, 32))
        soft = soft_binarize(p, th, 1e6)
        clear = np.abs(p - th) > 1e-5
        assert np.all(np.abs(soft - (p > th))[clear] < 1e-3)

    def test_monotone_per_pixel(self, rng: np.random.Generator) -> None:
        """Raising P at one pixel raises the output there and nowhere else."""
        p = rng.random((4, 4))
        th = rng.random((4, 4))
        bumped = p.copy()
        bumped[1, 2] += 0.1
        before, after = soft_binarize(p, th, 5.0), soft_binarize(bumped, th, 5.0)
        assert after[1, 2] > before[1, 2]
        after[1, 2] = before[1, 2]
        np.testing.assert_array_equal(after, before)

    def test_bernoulli_extremes(self) -> None:
        """P = 0 samples nothing; P = 1 samples everything."""
        assert bernoulli_realize(np.zeros((8, 8)), 1).count == 0
        full = bernoulli_realize(np.ones((8, 8)), 1)
        assert full.count == 64 and full.factor == 1.0

    def test_bernoulli_binomial_concentration(self) -> None:
        """Constant P = R: realized counts concentrate around the binomial mean."""
        factor, size = 0.25, 64 * 64
        sigma = np.sqrt(size * factor * (1 - factor))
        p = np.full((64, 64), factor)
        counts = np.array([bernoulli_realize(p, seed).count for seed in range(1000)])
        assert abs(counts.mean() - size * factor) <= 4 * sigma / np.sqrt(1000)
        assert np.all(np.abs(counts - size * factor) <= 6 * sigma)

    def test_topk_matches_full_sort(self) -> None:
        """On random 8x8 probabilities top-k equals sorting all 64 values."""
        for seed in range(20):
            p = np.random.default_rng(seed).random((8, 8))
            expected = np.zeros(64, dtype=bool)
            expected[np.argsort(-p.ravel(), kind="stable")[:16]] = True
            np.testing.assert_array_equal(topk_extract(p, 0.25).data, expected.reshape(8, 8))

    def test_topk_coincides_with_center(self) -> None:
        """P decreasing in (Chebyshev, Euclidean) distance reproduces the center pattern."""
        cheb = chebyshev_from_dc((12, 12))
        dist = distance_from_dc((12, 12))
        p = 10000.0 - (1000.0 * cheb + dist)
        for factor in (0.1, 0.25, 0.5):
            np.testing.assert_array_equal(topk_extract(p, factor).data, gen_center(12, 12, factor).data)

    def test_topk_invariant_under_positive_rescaling(self, rng: np.random.Generator) -> None:
        """Multiplying P by a positive constant selects the same entries."""
        for p in (rng.random((16, 16)), np.ones((16, 16))):
            base = topk_extract(p, 0.25).data
            for c in (0.3, 7.0, 1024.0):
                np.testing.assert_array_equal(topk_extract(c * p, 0.25).data, base)

    @pytest.mark.parametrize(("factor", "count"), [(0.25, 9216), (0.125, 4608)])
    def test_topk_cardinality_192(self, rng: np.random.Generator, factor: float, count: int) -> None:
        """192x192 masks keep 9216 entries at R = 1/4 and 4608 at R = 1/8."""
        assert topk_extract(rng.random((192, 192)), factor).count == count
