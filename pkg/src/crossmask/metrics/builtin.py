"""PSNR and SSIM."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from crossmask.errors import check_shape
from crossmask.fourier import Image2D
from crossmask.metrics.base import BaseMetric

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
# radius = int(truncate * sigma + 0.5) = 5, giving the 11 x 11 window
_SSIM_TRUNCATE = 3.5
# RMS error at or below this fraction of the peak is round-off
IDENTICAL_RTOL = 1e-12


def psnr(ref: Image2D, rec: Image2D, standard: bool = False) -> float:
    """Peak signal-to-noise ratio in dB.

    By default this is ``10 log10(MN * max(ref) / sum((ref - rec)^2))``, with
    the peak not squared. For images normalized to a peak of 1 it coincides
    with the conventional definition; ``standard=True`` uses ``max(ref)^2``.
    Returns ``inf`` when the images agree to floating-point precision, so a
    full-mask reconstruction scores ``inf`` despite FFT round-off. A blank
    reference (peak 0) with any error scores ``-inf``.
    """
    check_shape("reconstruction", np.shape(rec), np.shape(ref))
    ref = np.asarray(ref, dtype=np.float64)
    sse = float(np.sum((ref - np.asarray(rec, dtype=np.float64)) ** 2))
    peak = float(ref.max())
    if sse == 0.0 or math.sqrt(sse / ref.size) <= IDENTICAL_RTOL * abs(peak):
        return math.inf
    scale = peak**2 if standard else peak
    if scale <= 0.0:
        return -math.inf
    return 10.0 * math.log10(ref.size * scale / sse)


def ssim(
    ref: Image2D,
    rec: Image2D,
    data_range: float = 1.0,
    sigma: float = SSIM_SIGMA,
) -> float:
    """Mean structural similarity over an 11 x 11 Gaussian window.

    Uses ``C1 = (0.01 L)^2`` and ``C2 = (0.03 L)^2`` with symmetric boundary
    extension.
    """
    check_shape("reconstruction", np.shape(rec), np.shape(ref))
    if min(np.shape(ref)) < SSIM_WINDOW:
        raise ValueError(
            f"Image {np.shape(ref)} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )
    x = np.asarray(ref, dtype=np.float64)
    y = np.asarray(rec, dtype=np.float64)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def blur(a: Image2D) -> Image2D:
        result: Image2D = ndimage.gaussian_filter(a, sigma, mode="reflect", truncate=_SSIM_TRUNCATE)
        return result

    mu_x = blur(x)
    mu_y = blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov = blur(x * y) - mu_x * mu_y

    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


class PSNRMetric(BaseMetric):
    """Peak signal-to-noise ratio."""

    name = "psnr"
    unit = "dB"

    def __init__(self, standard: bool = False) -> None:
        self.standard = standard

    def calculate(self, ref: Image2D, rec: Image2D) -> float:
        return psnr(ref, rec, standard=self.standard)


class SSIMMetric(BaseMetric):
    """Structural similarity index."""

    name = "ssim"

    def calculate(self, ref: Image2D, rec: Image2D) -> float:
        return ssim(ref, rec)
