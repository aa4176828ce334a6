"""Baseline under-sampling pattern generators."""

from crossmask.patterns.base import BasePattern, BinaryMask, target_count, validate_factor
from crossmask.patterns.builtin import (
    PATTERNS,
    CenterPattern,
    GaussianRowsPattern,
    PoissonDiscPattern,
    bridson_darts,
    create_pattern,
    gen_center,
    gen_gaussian_1d,
    gen_poisson_variable_density,
)

__all__ = [
    # Base
    "BasePattern",
    "BinaryMask",
    "target_count",
    "validate_factor",
    # Generators
    "gen_gaussian_1d",
    "gen_center",
    "gen_poisson_variable_density",
    "bridson_darts",
    # Pattern classes
    "GaussianRowsPattern",
    "CenterPattern",
    "PoissonDiscPattern",
    "PATTERNS",
    "create_pattern",
]
