"""Tests for the evaluator and the motion stage loader."""

import math

import numpy as np

from crossmask.config import ExperimentConfig, ReconConfig, TranslatorKind
from crossmask.dataio import Manifest, split_subjects
from crossmask.motion import sample_rigid
from crossmask.pipeline import MaskEvaluator, load_moved_test
from crossmask.translator import SlicePair, TranslatorModel


class TestMaskEvaluator:
    """Tests for MaskEvaluator."""

    def test_blank_slice_translation_scores_minus_infinity(self) -> None:
        """A blank target with a nonzero translation is scored -inf and counted, not raised."""
        blank = np.zeros((16, 16))
        model = TranslatorModel(
            kind=TranslatorKind.PATCH_RIDGE, patch_size=1, ridge_weights=[0.0, 0.0, 0.0, 0.1]
        )
        pairs = [SlicePair((blank, blank, blank), blank)]
        report = MaskEvaluator(ReconConfig(), model).evaluate_translation(pairs)
        assert report.slices[0].psnr == -math.inf
        assert report.psnr.infinite_count == 1
        assert report.psnr.mean is None


class TestMovedTest:
    """Tests for load_moved_test."""

    def test_one_seeded_transform_per_pair(self, quick_config: ExperimentConfig) -> None:
        """Each test pair gets the transform drawn with seed [seed + fold, index]."""
        assert quick_config.data.manifest is not None
        split = split_subjects(Manifest.load(quick_config.data.manifest), quick_config.seed, 1)
        moved, transforms = load_moved_test(quick_config, split, fold=1)
        assert len(moved) == len(transforms) == 4 * len(split.test)
        motion = quick_config.motion
        for i, t in enumerate(transforms):
            assert t == sample_rigid([quick_config.seed + 1, i], motion.t_bound, motion.r_bound)
        assert all(pair.reference[1].shape == (32, 32) for pair in moved)
