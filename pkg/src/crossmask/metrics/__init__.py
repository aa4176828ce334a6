"""Image-quality metrics for reconstructions."""

from crossmask.metrics.base import BaseMetric
from crossmask.metrics.builtin import PSNRMetric, SSIMMetric, psnr, ssim

__all__ = [
    "BaseMetric",
    "PSNRMetric",
    "SSIMMetric",
    "psnr",
    "ssim",
]
