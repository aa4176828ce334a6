"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from crossmask import ExperimentConfig
from crossmask.dataio import write_phantom_dataset


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator for test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def smooth_images() -> np.ndarray:
    """Twelve smooth positive 16x16 images."""
    gen = np.random.default_rng(7)
    noise = gaussian_filter(gen.standard_normal((12, 16, 16)), sigma=(0, 2.0, 2.0))
    return 0.5 + noise / np.abs(noise).max() * 0.4


@pytest.fixture(scope="session")
def phantom_manifest(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """A small phantom dataset on disk: 10 subjects, 4 slices of 32x32."""
    directory = tmp_path_factory.mktemp("phantom")
    return write_phantom_dataset(directory, n_subjects=10, slices_per=4, size=32, seed=3)


@pytest.fixture
def quick_config(phantom_manifest: Path, tmp_path: Path) -> ExperimentConfig:
    """A fast experiment config over the phantom dataset."""
    return ExperimentConfig.model_validate(
        {
            "data": {"manifest": str(phantom_manifest), "reference": "t1", "target": "t2", "crop": 32},
            "translator": {"kind": "intensity_lut", "bins": 64},
            "train": {"R": 0.25, "lr": 0.01, "min_epochs": 2, "max_epochs": 3, "batch_size": 8},
            "baselines": ["all"],
            "seed": 0,
            "output_dir": str(tmp_path / "run"),
        }
    )
