"""Base metric class."""

from __future__ import annotations

from abc import ABC, abstractmethod

from crossmask.fourier import Image2D


class BaseMetric(ABC):
    """Base class for all image-quality metrics.

    A metric compares a reconstruction against its reference slice and
    returns a single number. Metrics do not pass or fail; reports aggregate
    them across slices.
    """

    name: str = "base"
    unit: str | None = None

    @abstractmethod
    def calculate(self, ref: Image2D, rec: Image2D) -> float:
        """Calculate the metric value.

        Args:
            ref: Fully-sampled reference image.
            rec: Reconstructed image of the same shape.

        Returns:
            The metric value.
        """
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"
