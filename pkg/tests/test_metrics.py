"""Tests for PSNR and SSIM."""

import math

import numpy as np
import pytest

from crossmask.errors import ShapeMismatchError
from crossmask.fourier import fft2_centered, ifft2_centered, magnitude
from crossmask.metrics import PSNRMetric, SSIMMetric, psnr, ssim


def ssim_oracle(x: np.ndarray, y: np.ndarray) -> float:
    """Direct evaluation with an explicit 11x11 Gaussian window and symmetric padding."""
    taps = np.exp(-(np.arange(-5, 6) ** 2) / (2 * 1.5**2))
    window = np.outer(taps, taps)
    window /= window.sum()

    def blur(a: np.ndarray) -> np.ndarray:
        padded = np.pad(a, 5, mode="symmetric")
        out = np.zeros_like(a)
        for i in range(11):
            for j in range(11):
                out += window[i, j] * padded[i : i + a.shape[0], j : j + a.shape[1]]
        return out

    c1, c2 = 0.01**2, 0.03**2
    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx**2
    vy = blur(y * y) - my**2
    cxy = blur(x * y) - mx * my
    values = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))
    return float(values.mean())


class TestPSNR:
    """Tests for psnr."""

    def test_twenty_db(self) -> None:
        """A uniform error of 0.1 on a unit-peak image is exactly 20 dB."""
        ref = np.ones((16, 16))
        assert psnr(ref, ref + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_identical_is_infinite(self, rng: np.random.Generator) -> None:
        """Identical images have infinite PSNR."""
        img = rng.random((8, 8))
        assert math.isinf(psnr(img, img.copy()))

    def test_blank_reference_is_minus_infinity(self) -> None:
        """An all-zero reference with any error scores -inf instead of failing."""
        blank = np.zeros((16, 16))
        assert psnr(blank, np.full((16, 16), 0.1)) == -math.inf
        assert psnr(blank, np.full((16, 16), 0.1), standard=True) == -math.inf
        assert math.isinf(psnr(blank, blank.copy())) and psnr(blank, blank.copy()) > 0

    def test_round_off_counts_as_identical(self, rng: np.random.Generator) -> None:
        """A full-mask round trip through k-space scores inf despite FFT round-off."""
        img = rng.random((16, 16))
        rec = magnitude(ifft2_centered(fft2_centered(img)))
        assert math.isinf(psnr(img, rec))
        assert math.isfinite(psnr(img, img + 1e-6))

    def test_peak_convention(self) -> None:
        """The default uses the peak unsquared; standard=True squares it."""
        ref = np.full((10, 10), 2.0)
        rec = ref + 0.1
        assert psnr(ref, rec) == pytest.approx(10 * math.log10(2.0 / 0.01))
        assert psnr(ref, rec, standard=True) == pytest.approx(10 * math.log10(4.0 / 0.01))

    def test_standard_matches_mse_definition(self, rng: np.random.Generator) -> None:
        """standard=True equals 10 log10(peak^2 / MSE)."""
        ref = rng.random((12, 12)) * 3
        rec = ref + rng.normal(scale=0.05, size=ref.shape)
        mse = np.mean((ref - rec) ** 2)
        assert psnr(ref, rec, standard=True) == pytest.approx(10 * math.log10(ref.max() ** 2 / mse))

    def test_unit_peak_conventions_agree(self, rng: np.random.Generator) -> None:
        """For a peak of 1 both conventions coincide."""
        ref = rng.random((8, 8))
        ref /= ref.max()
        rec = ref * 0.9
        assert psnr(ref, rec) == pytest.approx(psnr(ref, rec, standard=True))

    def test_shape_mismatch(self) -> None:
        """Reference and reconstruction must share a shape."""
        with pytest.raises(ShapeMismatchError):
            psnr(np.ones((4, 4)), np.ones((4, 5)))


class TestSSIM:
    """Tests for ssim."""

    def test_identity(self, rng: np.random.Generator) -> None:
        """An image compared with itself scores 1."""
        img = rng.random((32, 32))
        assert ssim(img, img) == pytest.approx(1.0, abs=1e-12)

    def test_matches_direct_window(self, rng: np.random.Generator) -> None:
        """Filtering agrees with an explicit windowed sum."""
        for _ in range(5):
            x = rng.random((24, 20))
            y = np.clip(x + rng.normal(scale=0.1, size=x.shape), 0, 1)
            assert ssim(x, y) == pytest.approx(ssim_oracle(x, y), abs=1e-10)

    def test_anticorrelated_scores_low(self, rng: np.random.Generator) -> None:
        """An inverted image is far from similar."""
        img = rng.random((32, 32))
        assert ssim(img, 1.0 - img) < 0.5

    def test_flip_invariance(self, rng: np.random.Generator) -> None:
        """Flipping both images leaves SSIM unchanged."""
        x = rng.random((20, 28))
        y = x * 0.8 + 0.1
        base = ssim(x, y)
        assert ssim(x[::-1], y[::-1]) == pytest.approx(base, abs=1e-12)
        assert ssim(x[:, ::-1], y[:, ::-1]) == pytest.approx(base, abs=1e-12)

    def test_symmetric_in_arguments(self, rng: np.random.Generator) -> None:
        """SSIM(x, y) == SSIM(y, x)."""
        x, y = rng.random((16, 16)), rng.random((16, 16))
        assert ssim(x, y) == pytest.approx(ssim(y, x), abs=1e-12)

    def test_too_small(self) -> None:
        """Images smaller than the window are rejected."""
        with pytest.raises(ValueError, match="SSIM window"):
            ssim(np.ones((10, 16)), np.ones((10, 16)))


class TestMetricClasses:
    """Tests for the metric wrappers."""

    def test_wrappers_delegate(self, rng: np.random.Generator) -> None:
        """Metric classes return the function values."""
        ref = rng.random((16, 16)) * 2
        rec = ref * 0.95
        assert PSNRMetric().calculate(ref, rec) == psnr(ref, rec)
        assert PSNRMetric(standard=True).calculate(ref, rec) == psnr(ref, rec, standard=True)
        assert SSIMMetric().calculate(ref, rec) == ssim(ref, rec)
        assert PSNRMetric.unit == "dB"
