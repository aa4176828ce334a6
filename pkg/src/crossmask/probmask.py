"""Probabilistic sampling masks.

The chain from a learnable weight map to a sampling pattern is::

    m = ReLU(clip(w, -1, 1) + r_norm)           adjusted_mass
    P = R * m / mean(m)                         scale_to_factor
    M_soft = sigmoid(sigma_p * (P - th))        soft_binarize (training)
    M = Bernoulli(min(P, 1))                    bernoulli_realize
    M = top floor(R*M*N) entries of P           topk_extract (inference)

P is not clipped to [0, 1] on the soft path, so ``mean(P) == R`` holds exactly.
"""

from __future__ import annotations

from typing import Any, TypeAlias

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import expit

from crossmask.errors import DegenerateMassError, check_shape
from crossmask.fourier import center_first_order
from crossmask.patterns.base import BinaryMask, target_count, validate_factor

WeightMap: TypeAlias = NDArray[np.float64]
ResidualMap: TypeAlias = NDArray[np.float64]
ThresholdMatrix: TypeAlias = NDArray[np.float64]


class ProbMask(BaseModel):
    """Nonnegative sampling probabilities whose mean equals the target factor."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    data: NDArray[np.float64]
    target_factor: float

    @field_validator("data", mode="before")
    @classmethod
    def _nonnegative(cls, value: Any) -> NDArray[np.float64]:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"ProbMask must be 2D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("ProbMask values must be finite and nonnegative")
        return arr

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])

    @property
    def mean(self) -> float:
        return float(self.data.mean())


def _values(p: ProbMask | NDArray[np.float64]) -> NDArray[np.float64]:
    return p.data if isinstance(p, ProbMask) else np.asarray(p, dtype=np.float64)


def adjusted_mass(w: WeightMap, r_norm: ResidualMap) -> NDArray[np.float64]:
    """Combine the weight map with the normalized residual prior.

    ``m = ReLU(clip(w, -1, 1) + r_norm)``.
    """
    check_shape("residual map", np.shape(r_norm), np.shape(w))
    result: NDArray[np.float64] = np.maximum(np.clip(w, -1.0, 1.0) + r_norm, 0.0)
    return result


def scale_to_factor(m: NDArray[np.float64], factor: float) -> ProbMask:
    """Rescale a nonnegative mass so its mean equals the factor R.

    Raises:
        DegenerateMassError: If the mass is identically zero.
    """
    validate_factor(factor)
    mean = float(np.mean(m))
    if not mean > 0.0:
        raise DegenerateMassError(
            "Adjusted sampling mass is identically zero; the weight map rectified every pixel"
        )
    return ProbMask(data=factor * np.asarray(m, dtype=np.float64) / mean, target_factor=factor)


def sample_thresholds(
    shape: tuple[int, int], rng: np.random.Generator | int
) -> ThresholdMatrix:
    """Draw a threshold matrix uniformly from [0, 1)."""
    generator = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return generator.random(shape)


def soft_binarize(
    p: ProbMask | NDArray[np.float64],
    th: ThresholdMatrix,
    sigma_p: float,
) -> NDArray[np.float64]:
    """Differentiable relaxation of thresholding: ``sigmoid(sigma_p * (P - th))``."""
    if sigma_p <= 0:
        raise ValueError(f"sigma_p must be positive, got {sigma_p}")
    values = _values(p)
    check_shape("threshold matrix", np.shape(th), values.shape)
    result: NDArray[np.float64] = expit(sigma_p * (values - th))
    return result


def bernoulli_realize(p: ProbMask | NDArray[np.float64], seed: int) -> BinaryMask:
    """Independent per-pixel Bernoulli draw with probability ``min(P, 1)``."""
    values = _values(p)
    rng = np.random.default_rng(seed)
    data = rng.random(values.shape) < np.minimum(values, 1.0)
    return BinaryMask(
        data=data,
        factor=float(data.mean()),
        kind="bernoulli",
        seed=seed,
    )


def topk_extract(p: ProbMask | NDArray[np.float64], factor: float) -> BinaryMask:
    """Deterministic inference mask: the ``floor(R * M * N)`` largest entries of P.

    Ties are broken toward DC (smaller Euclidean distance), then by row-major index.
    """
    validate_factor(factor)
    values = _values(p)
    height, width = values.shape
    k = target_count(height, width, factor)
    if k < 1:
        raise ValueError(f"floor(R * M * N) = 0 for R={factor} on {height}x{width}")

    order = center_first_order(values.shape, -values)
    return BinaryMask.from_flat_indices((height, width), order[:k], factor=factor, kind="topk")
