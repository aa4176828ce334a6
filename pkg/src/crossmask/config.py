"""Configuration loading and management."""

from __future__ import annotations

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, field_validator


class ReconKind(str, Enum):
    """Reconstruction operator used for evaluation."""

    ZERO_FILLED = "zero_filled"
    REGULARIZED_LS = "regularized_ls"
    REFERENCE_FILLED = "reference_filled"


class Regularizer(str, Enum):
    """Penalty operator for regularized least squares."""

    IDENTITY = "identity"
    FIRST_DIFFERENCE = "first_difference"


class TranslatorKind(str, Enum):
    """Cross-modality translator family."""

    IDENTITY = "identity"
    INTENSITY_LUT = "intensity_lut"
    PATCH_RIDGE = "patch_ridge"
    EXTERNAL = "external"


class ThresholdResample(str, Enum):
    """When the stochastic threshold matrix is redrawn during training."""

    PER_STEP = "per_step"
    PER_EPOCH = "per_epoch"


class ReconConfig(BaseModel):
    """Configuration for the reconstruction operator."""

    kind: ReconKind = ReconKind.ZERO_FILLED
    lam: float = Field(default=0.0, ge=0.0, alias="lambda")
    regularizer: Regularizer = Regularizer.IDENTITY
    cg_max_iters: int = Field(default=200, ge=1)
    cg_tol: float = Field(default=1e-10, gt=0.0)

    model_config = {"populate_by_name": True}


class TrainConfig(BaseModel):
    """Hyperparameters for joint refinement of the weight map."""

    factor: float = Field(default=0.25, gt=0.0, le=1.0, alias="R")
    sigma_p: float = Field(default=5.0, gt=0.0)
    lr: float = Field(default=2e-4, gt=0.0)
    beta1: float = Field(default=0.5, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=16, ge=1)
    min_epochs: int = Field(default=50, ge=1)
    max_epochs: int = Field(default=200, ge=1)
    patience: int = Field(default=10, ge=1)
    init_range: float = Field(default=0.1, gt=0.0)
    seed: int = Field(default=0, ge=0)
    threshold_resample: ThresholdResample = ThresholdResample.PER_STEP

    model_config = {"populate_by_name": True}

    @field_validator("max_epochs")
    @classmethod
    def _max_not_below_min(cls, value: int, info: Any) -> int:
        min_epochs = info.data.get("min_epochs")
        if min_epochs is not None and value < min_epochs:
            raise ValueError(f"max_epochs ({value}) must be >= min_epochs ({min_epochs})")
        return value

    def config_hash(self) -> str:
        """SHA-256 over the canonical JSON form; stored in checkpoints."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


class PatternConfig(BaseModel):
    """Parameters of the baseline pattern generators."""

    sigma_rows: float | None = Field(default=None, gt=0.0)
    r0: float = Field(default=1.0, gt=0.0)


class TranslatorConfig(BaseModel):
    """Which translator to fit and its parameters."""

    kind: TranslatorKind = TranslatorKind.INTENSITY_LUT
    bins: int = Field(default=256, ge=1)
    patch_size: int = Field(default=5, ge=1)
    lam: float = Field(default=1e-3, ge=0.0, alias="lambda")
    max_samples: int = Field(default=20000, ge=1)
    external_path: str | None = None

    model_config = {"populate_by_name": True}

    @field_validator("patch_size")
    @classmethod
    def _odd_patch(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"patch_size must be odd, got {value}")
        return value


class MotionConfig(BaseModel):
    """Inter-scan rigid motion applied to reference slices at evaluation."""

    enabled: bool = False
    t_bound: float = Field(default=5.0, ge=0.0)
    r_bound: float = Field(default=5.0, ge=0.0)


class DataConfig(BaseModel):
    """Where the data lives and how slices are drawn from it."""

    manifest: str | None = None
    reference: str = "t1"
    target: str = "t2"
    crop: int = Field(default=192, ge=1)
    slices_per_subject: int | None = Field(default=None, ge=1)
    slice_range: tuple[int, int] | None = None


class ExecutionConfig(BaseModel):
    """Configuration for evaluation execution."""

    workers: int = Field(
        default=1,
        ge=1,
        description="Number of worker threads for per-slice evaluation. Results are order-independent.",
    )


BASELINE_KINDS = ("gaussian1d", "center", "poisson", "pi_only", "au_only")


class ExperimentConfig(BaseModel):
    """Main crossmask experiment configuration."""

    version: int = 1

    data: DataConfig = Field(default_factory=DataConfig)
    pattern: PatternConfig = Field(default_factory=PatternConfig)
    translator: TranslatorConfig = Field(default_factory=TranslatorConfig)
    recon: ReconConfig = Field(default_factory=ReconConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    motion: MotionConfig = Field(default_factory=MotionConfig)
    execution: ExecutionConfig = Field(default_factory=ExecutionConfig)

    baselines: list[str] = Field(default_factory=list)
    folds: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    psnr_standard: bool = False

    # Output configuration
    output_dir: str = ".crossmask"

    @field_validator("baselines")
    @classmethod
    def _known_baselines(cls, value: list[str]) -> list[str]:
        expanded: list[str] = []
        for kind in value:
            if kind == "all":
                expanded.extend(BASELINE_KINDS)
            elif kind in BASELINE_KINDS:
                expanded.append(kind)
            else:
                raise ValueError(f"Unknown baseline {kind!r} (expected {BASELINE_KINDS} or 'all')")
        return list(dict.fromkeys(expanded))

    @classmethod
    def load(cls, path: str | Path | None = None) -> ExperimentConfig:
        """Load configuration from file.

        Searches for crossmask.yaml, crossmask.yml in order.
        """
        if path:
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"Config file not found: {path}")
            return cls._load_file(path)

        for name in ["crossmask.yaml", "crossmask.yml"]:
            p = Path(name)
            if p.exists():
                return cls._load_file(p)

        return cls()

    @classmethod
    def _load_file(cls, path: Path) -> ExperimentConfig:
        """Load configuration from a specific file."""
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return cls.model_validate(data)

    def save(self, path: str | Path) -> None:
        """Save configuration to file."""
        with open(path, "w") as f:
            yaml.safe_dump(
                self.model_dump(mode="json", by_alias=True, exclude_none=True),
                f,
                default_flow_style=False,
                sort_keys=True,
            )

    def validate_paths(self) -> None:
        """Check that every referenced input path exists."""
        missing = []
        if self.data.manifest and not Path(self.data.manifest).exists():
            missing.append(self.data.manifest)
        if self.translator.external_path and not Path(self.translator.external_path).exists():
            missing.append(self.translator.external_path)
        if missing:
            raise FileNotFoundError(f"Referenced paths do not exist: {', '.join(missing)}")


def generate_default_config() -> str:
    """Generate default configuration YAML."""
    return """# Crossmask Configuration
version: 1

data:
  manifest: data/manifest.yaml   # see `crossmask gen-phantom`
  reference: t1                  # fully-sampled assisting modality
  target: t2                     # accelerated modality
  crop: 192
  # slices_per_subject: 3
  # slice_range: [40, 100]

translator:
  kind: intensity_lut            # identity | intensity_lut | patch_ridge | external
  bins: 256

recon:
  kind: zero_filled              # zero_filled | regularized_ls | reference_filled
  lambda: 0.0
  regularizer: identity

train:
  R: 0.25
  sigma_p: 5.0
  lr: 0.0002
  beta1: 0.5
  beta2: 0.999
  batch_size: 16
  min_epochs: 50
  max_epochs: 200

pattern:
  r0: 1.0
  # sigma_rows: 32

motion:
  enabled: false
  t_bound: 5.0
  r_bound: 5.0

baselines: [all]
folds: 1
seed: 0
psnr_standard: false             # true: peak squared in the PSNR numerator

output_dir: .crossmask
"""
