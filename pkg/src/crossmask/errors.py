"""Exception hierarchy for crossmask."""

from __future__ import annotations


class CrossmaskError(Exception):
    """Base class for all crossmask errors."""


class ShapeMismatchError(CrossmaskError, ValueError):
    """Two grids that must share a shape do not."""

    def __init__(self, what: str, expected: tuple[int, ...], actual: tuple[int, ...]) -> None:
        super().__init__(f"{what}: expected shape {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class DegenerateMassError(CrossmaskError, ValueError):
    """The adjusted sampling mass is identically zero and cannot be scaled."""


class BracketError(CrossmaskError, RuntimeError):
    """A binary search could not bracket its target."""


class VolumeFormatError(CrossmaskError, ValueError):
    """A volume file has the wrong size or contains non-finite values."""


class TranslatorError(CrossmaskError, ValueError):
    """A translator could not be fitted or applied."""


class StageError(CrossmaskError):
    """A pipeline stage failed."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def check_shape(what: str, array_shape: tuple[int, ...], expected: tuple[int, ...]) -> None:
    """Raise ShapeMismatchError unless the two shapes agree."""
    if tuple(array_shape) != tuple(expected):
        raise ShapeMismatchError(what, tuple(expected), tuple(array_shape))
