"""Centered, unitary 2D Fourier transforms.

All k-space grids in crossmask store the DC coefficient at index
``(M // 2, N // 2)``. Both directions use the ``1/sqrt(MN)`` scaling, so
the transforms are unitary: energy is preserved and the inverse is the
adjoint. This is the same convention as ``fftshift(fft2(ifftshift(x), norm="ortho"))``.
"""

from __future__ import annotations

from typing import TypeAlias

import numpy as np
from numpy.typing import NDArray

Image2D: TypeAlias = NDArray[np.float64]
ComplexImage2D: TypeAlias = NDArray[np.complex128]
KSpace2D: TypeAlias = NDArray[np.complex128]

_AXES = (-2, -1)


def fft2_centered(img: NDArray[np.generic]) -> KSpace2D:
    """Forward unitary transform of an image (real or complex) into DC-centered k-space.

    Works on a single (M, N) grid or a stack (..., M, N).
    """
    shifted = np.fft.ifftshift(np.asarray(img), axes=_AXES)
    k = np.fft.fft2(shifted, axes=_AXES, norm="ortho")
    return np.fft.fftshift(k, axes=_AXES).astype(np.complex128, copy=False)


def ifft2_centered(k: NDArray[np.generic]) -> ComplexImage2D:
    """Inverse of :func:`fft2_centered`."""
    shifted = np.fft.ifftshift(np.asarray(k), axes=_AXES)
    img = np.fft.ifft2(shifted, axes=_AXES, norm="ortho")
    return np.fft.fftshift(img, axes=_AXES).astype(np.complex128, copy=False)


def magnitude(c: NDArray[np.generic]) -> Image2D:
    """Elementwise modulus."""
    return np.abs(np.asarray(c)).astype(np.float64, copy=False)


def dc_index(shape: tuple[int, ...]) -> tuple[int, int]:
    """Index of the DC coefficient for a grid of the given (M, N) shape."""
    m, n = shape[-2], shape[-1]
    return m // 2, n // 2


def distance_from_dc(shape: tuple[int, ...]) -> NDArray[np.float64]:
    """Euclidean distance of every pixel to the DC index."""
    m, n = shape[-2], shape[-1]
    cy, cx = dc_index((m, n))
    rows = np.arange(m, dtype=np.float64)[:, None] - cy
    cols = np.arange(n, dtype=np.float64)[None, :] - cx
    return np.sqrt(rows**2 + cols**2)


def chebyshev_from_dc(shape: tuple[int, ...]) -> NDArray[np.int64]:
    """Chebyshev (max-norm) distance of every pixel to the DC index."""
    m, n = shape[-2], shape[-1]
    cy, cx = dc_index((m, n))
    rows = np.abs(np.arange(m)[:, None] - cy)
    cols = np.abs(np.arange(n)[None, :] - cx)
    return np.maximum(rows, cols).astype(np.int64)


def center_first_order(
    shape: tuple[int, ...], primary: NDArray[np.generic] | None = None
) -> NDArray[np.int64]:
    """Flat pixel indices ordered by ``primary`` (ascending), then Euclidean distance
    to DC, then row-major index.

    Used as the deterministic tie-break for every "nearest the center" selection.
    Without ``primary`` the order is by distance alone.
    """
    dist = distance_from_dc(shape).ravel()
    flat = np.arange(dist.size)
    keys: tuple[NDArray[np.generic], ...] = (flat, dist)
    if primary is not None:
        keys = (*keys, np.asarray(primary).ravel())
    return np.lexsort(keys).astype(np.int64)
