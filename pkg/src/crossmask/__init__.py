"""Crossmask - residual-guided k-space under-sampling for multi-contrast MRI.

A fully sampled reference contrast (e.g. T1w) is translated into the target
contrast (e.g. T2w). Where the translation fails in k-space, the target scan
must measure; crossmask turns that residual into sampling probabilities and
refines them by gradient descent on a reconstruction loss.

Basic usage:
    from crossmask import (
        ExperimentConfig,
        TrainConfig,
        build_pairs,
        fit_intensity_lut,
        normalize_residual,
        residual_map,
        topk_extract,
        train,
    )

    pairs = build_pairs(t1_slices, t2_slices)
    translator = fit_intensity_lut(pairs[:40])
    prior = normalize_residual(residual_map(translator, pairs[40:50])).data

    cfg = TrainConfig(R=0.25, lr=1e-2, min_epochs=5, max_epochs=20)
    state, prob = train(t2_slices[:40], t2_slices[40:50], prior, cfg)
    mask = topk_extract(prob, cfg.factor)
    print(f"Sampled {mask.count} of {mask.data.size} k-space positions")
"""

from crossmask.config import (
    ExperimentConfig,
    ReconConfig,
    ReconKind,
    Regularizer,
    TrainConfig,
    TranslatorConfig,
    TranslatorKind,
)
from crossmask.errors import (
    BracketError,
    CrossmaskError,
    DegenerateMassError,
    ShapeMismatchError,
    StageError,
    TranslatorError,
    VolumeFormatError,
)
from crossmask.fourier import fft2_centered, ifft2_centered, magnitude
from crossmask.metrics import psnr, ssim
from crossmask.motion import RigidTransform, apply_rigid, sample_rigid
from crossmask.optimizer import TrainState, grad_w, train
from crossmask.patterns import BinaryMask, create_pattern
from crossmask.pipeline import MaskEvaluator, PipelineRunner
from crossmask.probmask import ProbMask, bernoulli_realize, soft_binarize, topk_extract
from crossmask.recon import reconstruct, regularized_ls, undersample, zero_filled
from crossmask.results import MetricReport, RunResult, SliceMetrics
from crossmask.translator import (
    SlicePair,
    TranslatorModel,
    build_pairs,
    fit_intensity_lut,
    fit_patch_ridge,
    normalize_residual,
    residual_map,
    translate,
)

__version__ = "0.1.0"

__all__ = [
    # Version
    "__version__",
    # Fourier
    "fft2_centered",
    "ifft2_centered",
    "magnitude",
    # Masks
    "BinaryMask",
    "ProbMask",
    "create_pattern",
    "soft_binarize",
    "bernoulli_realize",
    "topk_extract",
    # Translation
    "SlicePair",
    "TranslatorModel",
    "build_pairs",
    "fit_intensity_lut",
    "fit_patch_ridge",
    "translate",
    "residual_map",
    "normalize_residual",
    # Reconstruction
    "undersample",
    "zero_filled",
    "regularized_ls",
    "reconstruct",
    # Optimization
    "TrainState",
    "grad_w",
    "train",
    # Metrics & results
    "psnr",
    "ssim",
    "SliceMetrics",
    "MetricReport",
    "RunResult",
    # Motion
    "RigidTransform",
    "sample_rigid",
    "apply_rigid",
    # Runner
    "MaskEvaluator",
    "PipelineRunner",
    # Config
    "ExperimentConfig",
    "TrainConfig",
    "TranslatorConfig",
    "TranslatorKind",
    "ReconConfig",
    "ReconKind",
    "Regularizer",
    # Errors
    "CrossmaskError",
    "ShapeMismatchError",
    "DegenerateMassError",
    "BracketError",
    "VolumeFormatError",
    "TranslatorError",
    "StageError",
]
