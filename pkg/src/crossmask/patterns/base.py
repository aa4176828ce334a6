"""Base pattern classes and the binary mask model."""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator


def target_count(height: int, width: int, factor: float) -> int:
    """Number of samples ``floor(R * M * N)`` for a factor R.

    A small epsilon absorbs binary rounding of factors such as 1/3.
    """
    return int(math.floor(factor * height * width + 1e-9))


def validate_factor(factor: float) -> float:
    """Check that an under-sampling factor lies in (0, 1]."""
    if not 0.0 < factor <= 1.0:
        raise ValueError(f"Under-sampling factor must be in (0, 1], got {factor}")
    return float(factor)


class BinaryMask(BaseModel):
    """A realized {0, 1} sampling pattern on a DC-centered k-space grid."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: NDArray[np.bool_]
    factor: float
    kind: str = "custom"
    seed: int | None = None
    details: dict[str, Any] = Field(default_factory=dict)

    @field_validator("data", mode="before")
    @classmethod
    def _coerce_binary(cls, value: Any) -> NDArray[np.bool_]:
        arr = np.asarray(value)
        if arr.ndim != 2:
            raise ValueError(f"Mask must be 2D, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError("Mask values must be 0 or 1")
            arr = arr.astype(np.bool_)
        return arr

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def count(self) -> int:
        """Number of sampled positions."""
        return int(np.count_nonzero(self.data))

    def as_float(self) -> NDArray[np.float64]:
        """Mask as a 0.0/1.0 float grid, ready to multiply k-space."""
        return self.data.astype(np.float64)

    @classmethod
    def from_flat_indices(
        cls,
        shape: tuple[int, int],
        indices: NDArray[np.integer[Any]],
        factor: float,
        **kwargs: Any,
    ) -> BinaryMask:
        """Build a mask with ones at the given flat (row-major) indices."""
        data = np.zeros(shape[0] * shape[1], dtype=np.bool_)
        data[np.asarray(indices, dtype=np.int64)] = True
        return cls(data=data.reshape(shape), factor=factor, **kwargs)


class BasePattern(ABC):
    """Base class for fixed under-sampling pattern generators.

    Subclasses hold their generator parameters and produce a BinaryMask for a
    grid size, factor and seed. Deterministic generators ignore the seed.
    """

    name: str = "base"

    @abstractmethod
    def generate(self, height: int, width: int, factor: float, seed: int = 0) -> BinaryMask:
        """Generate a mask for an (height, width) grid at under-sampling factor ``factor``."""
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}()"
