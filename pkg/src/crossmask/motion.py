"""Inter-scan rigid motion of reference slices."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel
from scipy.ndimage import affine_transform

from crossmask.fourier import Image2D

SeedLike = int | Sequence[int]

# cosines and sines below this are treated as exactly zero
_TRIG_SNAP = 1e-12


class RigidTransform(BaseModel):
    """In-plane shift in pixels (1 px = 1 mm) followed by a rotation in degrees.

    Positive ``theta`` rotates counterclockwise, like ``np.rot90``.
    """

    dx: float = 0.0
    dy: float = 0.0
    theta: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self.dx == 0.0 and self.dy == 0.0 and self.theta == 0.0


def sample_rigid(seed: SeedLike, t_bound: float = 5.0, r_bound: float = 5.0) -> RigidTransform:
    """Draw dx, dy from U(-t_bound, t_bound) and theta from U(-r_bound, r_bound)."""
    if t_bound < 0 or r_bound < 0:
        raise ValueError(f"Motion bounds must be nonnegative, got t={t_bound}, r={r_bound}")
    rng = np.random.default_rng(seed)
    dx, dy = rng.uniform(-t_bound, t_bound, size=2)
    theta = rng.uniform(-r_bound, r_bound)
    return RigidTransform(dx=float(dx), dy=float(dy), theta=float(theta))


def _snap(value: float) -> float:
    return 0.0 if abs(value) < _TRIG_SNAP else value


def apply_rigid(img: Image2D, t: RigidTransform) -> Image2D:
    """Shift, then rotate about the image center.

    Bilinear interpolation; samples from outside the source are zero.
    """
    image = np.asarray(img, dtype=np.float64)
    if t.is_identity:
        return image.copy()

    rad = math.radians(t.theta)
    cos, sin = _snap(math.cos(rad)), _snap(math.sin(rad))
    # output (row, col) -> source (row, col)
    inverse = np.array([[cos, sin], [-sin, cos]])
    center = (np.array(image.shape, dtype=np.float64) - 1.0) / 2.0
    offset = center - inverse @ center - np.array([t.dy, t.dx])

    result: Image2D = affine_transform(
        image, inverse, offset=offset, order=1, mode="constant", cval=0.0
    )
    return result


def augment_slices(
    slices: Sequence[Image2D],
    seed: int,
    t_bound: float = 5.0,
    r_bound: float = 5.0,
) -> tuple[list[Image2D], list[RigidTransform]]:
    """Move every slice by its own transform, drawn with seed ``[seed, index]``."""
    moved: list[Image2D] = []
    transforms: list[RigidTransform] = []
    for i, img in enumerate(slices):
        t = sample_rigid([seed, i], t_bound, r_bound)
        moved.append(apply_rigid(img, t))
        transforms.append(t)
    return moved, transforms


def transforms_table(transforms: Sequence[RigidTransform]) -> NDArray[np.float64]:
    """Rows of (slice, dx, dy, theta)."""
    return np.array(
        [[i, t.dx, t.dy, t.theta] for i, t in enumerate(transforms)], dtype=np.float64
    ).reshape(-1, 4)
