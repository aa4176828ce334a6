"""Cross-modality translation and the residual-map prior.

A translator predicts the target modality slice from three neighbouring
reference slices. The k-space magnitude of its error, averaged over the
validation set, marks frequencies the reference modality cannot supply and
initializes the sampling probabilities.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import yaml
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from crossmask.config import TranslatorConfig, TranslatorKind
from crossmask.errors import ShapeMismatchError, TranslatorError
from crossmask.fourier import Image2D, fft2_centered
from crossmask.probmask import ResidualMap


class SlicePair(NamedTuple):
    """A reference triplet (slices i-1, i, i+1) and the co-located target slice."""

    reference: tuple[Image2D, Image2D, Image2D]
    target: Image2D


PairedSliceSet = list[SlicePair]


def build_pairs(reference: Sequence[Image2D], target: Sequence[Image2D]) -> PairedSliceSet:
    """Pair each target slice with its reference triplet.

    Boundary slices duplicate their single neighbour.
    """
    if len(reference) != len(target):
        raise ValueError(
            f"Reference and target stacks differ in length: {len(reference)} vs {len(target)}"
        )
    pairs: PairedSliceSet = []
    n = len(reference)
    for i in range(n):
        if reference[i].shape != target[i].shape:
            raise ShapeMismatchError("target slice", reference[i].shape, target[i].shape)
        below = reference[i - 1] if i > 0 else reference[min(i + 1, n - 1)]
        above = reference[i + 1] if i < n - 1 else reference[max(i - 1, 0)]
        pairs.append(SlicePair((below, reference[i], above), target[i]))
    return pairs


class TranslatorModel(BaseModel):
    """A fitted (or parameter-free) translator, serializable to YAML."""

    kind: TranslatorKind

    # intensity_lut
    lut_centers: list[float] | None = None
    lut_values: list[float] | None = None

    # patch_ridge
    patch_size: int | None = None
    ridge_weights: list[float] | None = None

    # external
    external_path: str | None = None
    external_dims: list[int] | None = None

    metadata: dict[str, Any] = Field(default_factory=dict)

    @property
    def is_fitted(self) -> bool:
        """Whether the model carries everything translate() needs."""
        if self.kind == TranslatorKind.INTENSITY_LUT:
            return self.lut_centers is not None and self.lut_values is not None
        if self.kind == TranslatorKind.PATCH_RIDGE:
            return self.ridge_weights is not None and self.patch_size is not None
        if self.kind == TranslatorKind.EXTERNAL:
            return self.external_path is not None and self.external_dims is not None
        return True

    def to_yaml(self) -> str:
        """Convert model to YAML string."""
        result: str = yaml.safe_dump(
            self.model_dump(mode="json", exclude_none=True), default_flow_style=None
        )
        return result

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())

    @classmethod
    def load(cls, path: str | Path) -> TranslatorModel:
        """Load a model from a YAML file."""
        with open(path) as f:
            data = yaml.safe_load(f)
        return cls.model_validate(data)


def _require_pairs(pairs: PairedSliceSet, what: str) -> None:
    if not pairs:
        raise TranslatorError(f"{what} set is empty")


def identity_translator() -> TranslatorModel:
    """Translator that returns the center reference slice."""
    return TranslatorModel(kind=TranslatorKind.IDENTITY)


def external_translator(path: str | Path, dims: Sequence[int]) -> TranslatorModel:
    """Translator backed by a volume of pre-synthesized target slices."""
    return TranslatorModel(
        kind=TranslatorKind.EXTERNAL,
        external_path=str(path),
        external_dims=[int(d) for d in dims],
    )


def fit_intensity_lut(train: PairedSliceSet, bins: int = 256) -> TranslatorModel:
    """Fit a per-intensity-bin conditional mean of the target given the center reference slice.

    The conditional mean minimizes the squared translation error among all
    predictors that are constant within each bin. Empty bins take the value of
    the nearest nonempty bin (the lower one on ties).
    """
    _require_pairs(train, "Training")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")

    ref = np.concatenate([pair.reference[1].ravel() for pair in train])
    tgt = np.concatenate([pair.target.ravel() for pair in train])
    idx = np.clip(np.floor(ref * bins).astype(np.int64), 0, bins - 1)

    sums = np.bincount(idx, weights=tgt, minlength=bins)
    counts = np.bincount(idx, minlength=bins)
    filled = np.flatnonzero(counts)

    values = np.zeros(bins)
    values[filled] = sums[filled] / counts[filled]
    for b in np.flatnonzero(counts == 0):
        nearest = filled[np.argmin(np.abs(filled - b))]
        values[b] = values[nearest]

    centers = (np.arange(bins) + 0.5) / bins
    return TranslatorModel(
        kind=TranslatorKind.INTENSITY_LUT,
        lut_centers=centers.tolist(),
        lut_values=values.tolist(),
        metadata={"bins": bins, "pairs": len(train), "empty_bins": int((counts == 0).sum())},
    )


def patch_features(triplet: Sequence[Image2D], k: int) -> NDArray[np.float64]:
    """Design matrix rows for every pixel: three flattened k x k patches plus a bias 1.

    Borders use reflect padding.
    """
    if k % 2 == 0:
        raise ValueError(f"Patch size must be odd, got {k}")
    half = k // 2
    height, width = triplet[1].shape
    blocks = []
    for img in triplet:
        padded = np.pad(np.asarray(img, dtype=np.float64), half, mode="reflect")
        windows = sliding_window_view(padded, (k, k))
        blocks.append(windows.reshape(height * width, k * k))
    blocks.append(np.ones((height * width, 1)))
    return np.hstack(blocks)


def _ridge_penalty(n_features: int, lam: float) -> NDArray[np.float64]:
    # the bias coefficient is left unpenalized
    penalty = np.full(n_features, lam)
    penalty[-1] = 0.0
    return np.diag(penalty)


def ridge_system(
    train: PairedSliceSet,
    k: int,
    lam: float,
    max_samples: int,
    seed: int,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Assemble ``(A^T A + lambda D, A^T b)`` for patch ridge regression.

    D is the identity with a zero for the bias coordinate. At most
    ``max_samples`` rows are kept, chosen with ``seed``.
    """
    _require_pairs(train, "Training")
    design = np.vstack([patch_features(pair.reference, k) for pair in train])
    response = np.concatenate([pair.target.ravel() for pair in train])
    if design.shape[0] > max_samples:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(design.shape[0], size=max_samples, replace=False))
        design, response = design[keep], response[keep]
    gram = design.T @ design + _ridge_penalty(design.shape[1], lam)
    return gram, design.T @ response


def fit_patch_ridge(
    train: PairedSliceSet,
    k: int = 5,
    lam: float = 1e-3,
    max_samples: int = 20000,
    seed: int = 0,
) -> TranslatorModel:
    """Fit a linear patch regressor by solving the ridge normal equations."""
    if k % 2 == 0:
        raise ValueError(f"Patch size must be odd, got {k}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    gram, rhs = ridge_system(train, k, lam, max_samples, seed)
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as e:
        raise TranslatorError(f"Ridge normal equations are singular (lambda={lam}): {e}") from e
    return TranslatorModel(
        kind=TranslatorKind.PATCH_RIDGE,
        patch_size=k,
        ridge_weights=beta.tolist(),
        metadata={"lambda": lam, "pairs": len(train), "max_samples": max_samples, "seed": seed},
    )


def fit_translator(train: PairedSliceSet, cfg: TranslatorConfig, seed: int = 0) -> TranslatorModel:
    """Fit the translator family selected by the configuration."""
    if cfg.kind == TranslatorKind.IDENTITY:
        return identity_translator()
    if cfg.kind == TranslatorKind.INTENSITY_LUT:
        return fit_intensity_lut(train, cfg.bins)
    if cfg.kind == TranslatorKind.PATCH_RIDGE:
        return fit_patch_ridge(train, cfg.patch_size, cfg.lam, cfg.max_samples, seed)
    if cfg.external_path is None:
        raise TranslatorError("External translator requires translator.external_path")
    from crossmask.dataio import read_volume_header

    return external_translator(cfg.external_path, read_volume_header(cfg.external_path))


def translate(
    model: TranslatorModel,
    triplet: Sequence[Image2D],
    index: int | None = None,
) -> Image2D:
    """Synthesize the target slice from a reference triplet.

    Args:
        model: Fitted translator.
        triplet: Reference slices (i-1, i, i+1).
        index: Slice index into the external volume (external kind only).
    """
    if not model.is_fitted:
        raise TranslatorError(f"Translator of kind {model.kind.value} is not fitted")
    center = np.asarray(triplet[1], dtype=np.float64)

    if model.kind == TranslatorKind.IDENTITY:
        return center.copy()

    if model.kind == TranslatorKind.INTENSITY_LUT:
        assert model.lut_centers is not None and model.lut_values is not None
        result: Image2D = np.interp(center, model.lut_centers, model.lut_values)
        return result

    if model.kind == TranslatorKind.PATCH_RIDGE:
        assert model.ridge_weights is not None and model.patch_size is not None
        features = patch_features(triplet, model.patch_size)
        return (features @ np.asarray(model.ridge_weights)).reshape(center.shape)

    return _external_slice(model, index, center.shape)


def _external_slice(model: TranslatorModel, index: int | None, shape: tuple[int, ...]) -> Image2D:
    from crossmask.dataio import load_volume

    assert model.external_path is not None and model.external_dims is not None
    if index is None:
        raise TranslatorError("External translator needs a slice index")
    if not Path(model.external_path).exists():
        raise TranslatorError(f"External translation volume not found: {model.external_path}")
    volume = load_volume(model.external_path, model.external_dims)
    if not 0 <= index < volume.data.shape[0]:
        raise TranslatorError(
            f"Slice {index} out of range for external volume with {volume.data.shape[0]} slices"
        )
    synthesized = volume.data[index].astype(np.float64)
    if synthesized.shape != tuple(shape):
        raise ShapeMismatchError("external slice", tuple(shape), synthesized.shape)
    return synthesized


def translate_all(model: TranslatorModel, pairs: PairedSliceSet) -> list[Image2D]:
    """Translate every pair in order; the list position is the external slice index."""
    return [translate(model, pair.reference, index=i) for i, pair in enumerate(pairs)]


def translation_loss(model: TranslatorModel, pairs: PairedSliceSet) -> float:
    """Mean squared translation error over all pixels of all pairs."""
    _require_pairs(pairs, "Evaluation")
    errors = [
        np.mean((synth - pair.target) ** 2)
        for synth, pair in zip(translate_all(model, pairs), pairs, strict=True)
    ]
    return float(np.mean(errors))


def residual_map(model: TranslatorModel, validation: PairedSliceSet) -> ResidualMap:
    """Average k-space magnitude of the translation error over the validation set.

    ``r = mean_i |F(translate(x_ref_i)) - F(x_target_i)|``. Slices are reduced
    in list order.
    """
    _require_pairs(validation, "Validation")
    total = np.zeros(validation[0].target.shape, dtype=np.float64)
    for synth, pair in zip(translate_all(model, validation), validation, strict=True):
        total += np.abs(fft2_centered(synth) - fft2_centered(pair.target))
    result: ResidualMap = total / len(validation)
    return result


class NormalizedResidual(NamedTuple):
    """Min-max normalized residual and whether the input was constant."""

    data: ResidualMap
    degenerate: bool


def normalize_residual(r: ResidualMap) -> NormalizedResidual:
    """Min-max normalize the residual map to [0, 1].

    A constant map becomes all zeros with ``degenerate=True``.
    """
    lo = float(np.min(r))
    hi = float(np.max(r))
    if hi == lo:
        return NormalizedResidual(np.zeros_like(r, dtype=np.float64), True)
    return NormalizedResidual((np.asarray(r, dtype=np.float64) - lo) / (hi - lo), False)


UNIFORM_PRIOR = 0.5


def uniform_prior(shape: tuple[int, int]) -> ResidualMap:
    """Uninformative prior substituted for a degenerate residual."""
    return np.full(shape, UNIFORM_PRIOR, dtype=np.float64)
