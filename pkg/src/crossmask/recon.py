"""Reconstruction operators.

``zero_filled`` is the differentiable surrogate used while optimizing
patterns. ``regularized_ls`` and ``reference_filled`` are evaluation-only.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from crossmask.config import ReconConfig, ReconKind, Regularizer
from crossmask.errors import check_shape
from crossmask.fourier import (
    ComplexImage2D,
    Image2D,
    KSpace2D,
    fft2_centered,
    ifft2_centered,
    magnitude,
)
from crossmask.patterns.base import BinaryMask

logger = logging.getLogger(__name__)

LinearOperator = Callable[[ComplexImage2D], ComplexImage2D]


def _mask_values(mask: BinaryMask | NDArray[np.generic]) -> NDArray[np.float64]:
    if isinstance(mask, BinaryMask):
        return mask.as_float()
    return np.asarray(mask, dtype=np.float64)


def undersample(image: NDArray[np.generic], mask: BinaryMask | NDArray[np.generic]) -> KSpace2D:
    """Retrospective under-sampling: ``M * F(x)``."""
    values = _mask_values(mask)
    check_shape("mask", values.shape, np.shape(image)[-2:])
    return fft2_centered(image) * values


def zero_filled(y_u: KSpace2D) -> Image2D:
    """Magnitude of the inverse transform with unmeasured positions left at zero."""
    return magnitude(ifft2_centered(y_u))


def reference_filled(
    y_u: KSpace2D,
    mask: BinaryMask | NDArray[np.generic],
    reference: Image2D,
) -> Image2D:
    """Keep measured samples and take unmeasured ones from a reference image's spectrum.

    ``X = M * y_u + (1 - M) * F(reference)``.
    """
    values = _mask_values(mask)
    check_shape("reference image", np.shape(reference), values.shape)
    filled = values * y_u + (1.0 - values) * fft2_centered(reference)
    return magnitude(ifft2_centered(filled))


def forward_difference(x: ComplexImage2D) -> tuple[ComplexImage2D, ComplexImage2D]:
    """Vertical and horizontal forward differences with periodic boundary."""
    return np.roll(x, -1, axis=0) - x, np.roll(x, -1, axis=1) - x


def forward_difference_adjoint(dv: ComplexImage2D, dh: ComplexImage2D) -> ComplexImage2D:
    result: ComplexImage2D = (np.roll(dv, 1, axis=0) - dv) + (np.roll(dh, 1, axis=1) - dh)
    return result


def penalty_gram(regularizer: Regularizer) -> LinearOperator:
    """``Gamma^H Gamma`` for the chosen regularizer."""
    if regularizer == Regularizer.IDENTITY:
        return lambda x: x
    return lambda x: forward_difference_adjoint(*forward_difference(x))


def penalty_value(x: ComplexImage2D, regularizer: Regularizer) -> float:
    """``||Gamma x||^2``."""
    if regularizer == Regularizer.IDENTITY:
        return float(np.vdot(x, x).real)
    dv, dh = forward_difference(x)
    return float(np.vdot(dv, dv).real + np.vdot(dh, dh).real)


class CGResult(NamedTuple):
    """Outcome of a conjugate gradient solve."""

    x: ComplexImage2D
    iterations: int
    residual: float
    converged: bool
    objective: list[float]


def cg_solve(
    apply_a: LinearOperator,
    b: ComplexImage2D,
    tol: float = 1e-10,
    max_iters: int = 200,
    objective: Callable[[ComplexImage2D], float] | None = None,
) -> CGResult:
    """Conjugate gradient for a Hermitian positive semi-definite operator.

    Starts from zero and stops when ``||b - A x|| <= tol * ||b||``. When
    ``objective`` is given it is evaluated at the start and after every
    iteration.
    """
    x = np.zeros_like(b, dtype=np.complex128)
    b_norm = float(np.linalg.norm(b))
    history = [objective(x)] if objective is not None else []
    if b_norm == 0.0:
        return CGResult(x, 0, 0.0, True, history)

    r = b.astype(np.complex128, copy=True)
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    iterations = 0
    while iterations < max_iters and np.sqrt(rs) > tol * b_norm:
        ap = apply_a(p)
        curvature = float(np.vdot(p, ap).real)
        if curvature <= 0.0:
            break
        alpha = rs / curvature
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(np.vdot(r, r).real)
        p = r + (rs_new / rs) * p
        rs = rs_new
        iterations += 1
        if objective is not None:
            history.append(objective(x))

    relative = float(np.sqrt(rs)) / b_norm
    return CGResult(x, iterations, relative, relative <= tol, history)


def solve_regularized_ls(
    y_u: KSpace2D,
    mask: BinaryMask | NDArray[np.generic],
    lam: float,
    regularizer: Regularizer,
    tol: float = 1e-10,
    max_iters: int = 200,
    track_objective: bool = False,
) -> CGResult:
    """Minimize ``||M * F(x) - y_u||^2 + lam * ||Gamma x||^2`` over complex x by CG.

    Solves the normal equations ``(F^H M F + lam Gamma^H Gamma) x = F^H M y_u``.
    """
    values = _mask_values(mask)
    check_shape("mask", values.shape, np.shape(y_u))
    gram = penalty_gram(regularizer)
    measured = values * y_u

    def apply_a(x: ComplexImage2D) -> ComplexImage2D:
        return ifft2_centered(values * fft2_centered(x)) + lam * gram(x)

    def objective(x: ComplexImage2D) -> float:
        misfit = values * fft2_centered(x) - measured
        return float(np.vdot(misfit, misfit).real) + lam * penalty_value(x, regularizer)

    return cg_solve(
        apply_a,
        ifft2_centered(measured),
        tol=tol,
        max_iters=max_iters,
        objective=objective if track_objective else None,
    )


def regularized_ls(
    y_u: KSpace2D,
    mask: BinaryMask | NDArray[np.generic],
    cfg: ReconConfig,
) -> Image2D:
    """Regularized least-squares reconstruction, returned as a magnitude image.

    The identity regularizer has the per-coefficient closed form
    ``X = M * y_u / (1 + lam)``; the first-difference regularizer is solved
    by conjugate gradient. Non-convergence is logged and the last iterate is
    returned.
    """
    values = _mask_values(mask)
    if cfg.regularizer == Regularizer.IDENTITY:
        return magnitude(ifft2_centered(values * y_u / (1.0 + cfg.lam)))

    result = solve_regularized_ls(
        y_u, values, cfg.lam, cfg.regularizer, tol=cfg.cg_tol, max_iters=cfg.cg_max_iters
    )
    if not result.converged:
        logger.warning(
            "CG did not converge in %d iterations (relative residual %.3e > %.1e)",
            result.iterations,
            result.residual,
            cfg.cg_tol,
        )
    return magnitude(result.x)


def reconstruct(
    y_u: KSpace2D,
    mask: BinaryMask | NDArray[np.generic],
    cfg: ReconConfig,
    reference: Image2D | None = None,
) -> Image2D:
    """Dispatch to the reconstructor selected by ``cfg.kind``."""
    if cfg.kind == ReconKind.ZERO_FILLED:
        return zero_filled(y_u)
    if cfg.kind == ReconKind.REGULARIZED_LS:
        return regularized_ls(y_u, mask, cfg)
    if reference is None:
        raise ValueError("reference_filled reconstruction needs a translated reference image")
    return reference_filled(y_u, mask, reference)
