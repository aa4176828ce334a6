"""Dataset ingestion, splitting, phantom generation and file formats.

Volumes are raw little-endian float32, slice-major and row-major, listed in a
YAML manifest::

    subjects:
      - id: sub-000
        dims: [slices, height, width]
        voxel_size: [1.0, 1.0, 1.0]
        volumes: {t1: sub-000_t1.raw, t2: sub-000_t2.raw}

Volume paths are relative to the manifest file.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Callable, Sequence
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import yaml
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.ndimage import gaussian_filter
from scipy.special import expit

from crossmask.errors import VolumeFormatError
from crossmask.fourier import Image2D
from crossmask.motion import RigidTransform, apply_rigid
from crossmask.patterns.base import BinaryMask
from crossmask.probmask import ProbMask
from crossmask.results import MetricReport
from crossmask.translator import PairedSliceSet, SlicePair, build_pairs

logger = logging.getLogger(__name__)

VOLUME_DTYPE = np.dtype("<f4")
HEADER_SUFFIX = ".yaml"


# Manifest


class SubjectEntry(BaseModel):
    """One subject: its grid dims and a volume file per modality."""

    id: str
    dims: tuple[int, int, int]
    voxel_size: tuple[float, float, float] = (1.0, 1.0, 1.0)
    volumes: dict[str, str] = Field(default_factory=dict)

    @field_validator("dims")
    @classmethod
    def _positive_dims(cls, value: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(d <= 0 for d in value):
            raise ValueError(f"dims must be positive, got {value}")
        return value


class Manifest(BaseModel):
    """Subjects of a dataset."""

    subjects: list[SubjectEntry] = Field(default_factory=list)

    _root: Path = PrivateAttr(default_factory=Path)

    @model_validator(mode="after")
    def _unique_entries(self) -> Manifest:
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("Subject ids must be unique")
        paths = [p for s in self.subjects for p in s.volumes.values()]
        if len(set(paths)) != len(paths):
            raise ValueError("Volume paths must be unique per (subject, modality)")
        return self

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    @property
    def root(self) -> Path:
        """Directory volume paths are resolved against."""
        return self._root

    def subject(self, subject_id: str) -> SubjectEntry:
        for entry in self.subjects:
            if entry.id == subject_id:
                return entry
        raise KeyError(f"Subject not in manifest: {subject_id}")

    def volume_path(self, subject_id: str, modality: str) -> Path:
        """Resolved path of a subject's volume for one modality."""
        entry = self.subject(subject_id)
        if modality not in entry.volumes:
            raise KeyError(f"Subject {subject_id} has no {modality!r} volume")
        return self._root / entry.volumes[modality]

    def to_yaml(self) -> str:
        result: str = yaml.safe_dump(
            self.model_dump(mode="json"), default_flow_style=None, sort_keys=False
        )
        return result

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())

    @classmethod
    def load(cls, path: str | Path) -> Manifest:
        """Load a manifest; relative volume paths resolve against its directory."""
        path = Path(path)
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        manifest = cls.model_validate(data)
        manifest._root = path.parent
        return manifest


# Volumes


class Volume(BaseModel):
    """A (slices, height, width) stack of finite float32 values."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    dims: tuple[int, int, int]
    data: NDArray[np.float32]

    @property
    def n_slices(self) -> int:
        return self.dims[0]


def _nonfinite_slices(data: NDArray[np.floating[Any]]) -> list[int]:
    finite = np.isfinite(data).reshape(data.shape[0], -1).all(axis=1)
    return [int(i) for i in np.flatnonzero(~finite)]


def load_volume(path: str | Path, dims: Sequence[int]) -> Volume:
    """Read a raw little-endian float32 volume.

    Raises:
        VolumeFormatError: If the file size does not match ``dims`` or the
            data holds NaN/Inf values (the message names the slices).
    """
    path = Path(path)
    shape = tuple(int(d) for d in dims)
    if len(shape) != 3 or any(d <= 0 for d in shape):
        raise ValueError(f"dims must be three positive integers, got {list(dims)}")
    expected = math.prod(shape) * VOLUME_DTYPE.itemsize
    try:
        actual = path.stat().st_size
    except OSError as e:
        raise VolumeFormatError(f"Cannot read volume {path}: {e}") from e
    if actual != expected:
        raise VolumeFormatError(
            f"Volume {path} has {actual} bytes, expected {expected} bytes for dims {list(shape)}"
        )

    data = np.fromfile(path, dtype=VOLUME_DTYPE).reshape(shape)
    bad = _nonfinite_slices(data)
    if bad:
        listed = ", ".join(str(i) for i in bad)
        raise VolumeFormatError(f"Volume {path} contains NaN/Inf values in slice {listed}")
    return Volume(dims=(shape[0], shape[1], shape[2]), data=data)


def save_volume(path: str | Path, data: NDArray[np.generic], header: bool = True) -> None:
    """Write a volume as raw float32, with a ``<path>.yaml`` header holding its dims."""
    path = Path(path)
    arr = np.asarray(data, dtype=VOLUME_DTYPE)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"Volume must be 3D (slices, height, width), got shape {arr.shape}")
    arr.tofile(path)
    if header:
        header_path = path.with_name(path.name + HEADER_SUFFIX)
        header_path.write_text(yaml.safe_dump({"dims": list(arr.shape)}, default_flow_style=True))


def read_volume_header(path: str | Path) -> list[int]:
    """Dims recorded next to a volume by :func:`save_volume`."""
    path = Path(path)
    header_path = path.with_name(path.name + HEADER_SUFFIX)
    if not header_path.exists():
        raise VolumeFormatError(f"No header for volume {path} (expected {header_path})")
    with open(header_path) as f:
        meta = yaml.safe_load(f) or {}
    dims = meta.get("dims")
    if not isinstance(dims, list) or len(dims) != 3:
        raise VolumeFormatError(f"Header {header_path} must list three dims")
    return [int(d) for d in dims]


class PreprocessedVolume(NamedTuple):
    """Cropped and normalized slices; ``degenerate`` marks a constant input volume."""

    slices: list[Image2D]
    degenerate: bool


def center_crop(img: NDArray[np.generic], crop: int | tuple[int, int]) -> NDArray[np.generic]:
    """Central window of the last two axes; an int crop means a square window."""
    crop_h, crop_w = (crop, crop) if isinstance(crop, int) else crop
    height, width = img.shape[-2:]
    if height < crop_h or width < crop_w:
        raise ValueError(f"Slice of {height}x{width} is smaller than crop {crop_h}x{crop_w}")
    top = (height - crop_h) // 2
    left = (width - crop_w) // 2
    return img[..., top : top + crop_h, left : left + crop_w]


def preprocess(v: Volume, crop: int | tuple[int, int] = 192) -> PreprocessedVolume:
    """Center crop every slice, then min-max normalize over the whole volume."""
    cropped = center_crop(v.data, crop).astype(np.float64)
    lo = float(cropped.min())
    hi = float(cropped.max())
    if hi == lo:
        return PreprocessedVolume([np.zeros_like(s) for s in cropped], True)
    normalized = (cropped - lo) / (hi - lo)
    return PreprocessedVolume(list(normalized), False)


def select_slices(
    n_slices: int,
    slices_per_subject: int | None = None,
    slice_range: tuple[int, int] | None = None,
) -> list[int]:
    """Slice indices to use from one volume.

    ``slice_range`` is half-open. ``slices_per_subject`` picks evenly spaced
    slices inside the range.
    """
    lo, hi = slice_range if slice_range is not None else (0, n_slices)
    if not 0 <= lo < hi <= n_slices:
        raise ValueError(f"slice_range {lo}..{hi} does not fit a volume of {n_slices} slices")
    indices = list(range(lo, hi))
    if slices_per_subject is not None and slices_per_subject < len(indices):
        picked = np.rint(np.linspace(lo, hi - 1, slices_per_subject)).astype(np.int64)
        indices = sorted({int(i) for i in picked})
    return indices


def load_modality(manifest: Manifest, subject_id: str, modality: str, crop: int) -> list[Image2D]:
    """Preprocessed slices of one subject's modality."""
    entry = manifest.subject(subject_id)
    volume = load_volume(manifest.volume_path(subject_id, modality), entry.dims)
    slices, degenerate = preprocess(volume, crop)
    if degenerate:
        logger.warning("Volume %s/%s is constant; normalized to zeros", subject_id, modality)
    return slices


def load_pairs(
    manifest: Manifest,
    subject_ids: Sequence[str],
    reference: str,
    target: str,
    crop: int,
    slices_per_subject: int | None = None,
    slice_range: tuple[int, int] | None = None,
) -> PairedSliceSet:
    """Reference triplet / target pairs for the selected slices of the given subjects.

    Triplet neighbours come from the full volume, so selecting a slice never
    changes its neighbours.
    """
    pairs: PairedSliceSet = []
    for subject_id in subject_ids:
        ref = load_modality(manifest, subject_id, reference, crop)
        tgt = load_modality(manifest, subject_id, target, crop)
        subject_pairs = build_pairs(ref, tgt)
        for i in select_slices(len(subject_pairs), slices_per_subject, slice_range):
            pairs.append(subject_pairs[i])
    return pairs


def load_moved_pairs(
    manifest: Manifest,
    subject_ids: Sequence[str],
    reference: str,
    target: str,
    crop: int,
    transform_for: Callable[[int], RigidTransform],
    slices_per_subject: int | None = None,
    slice_range: tuple[int, int] | None = None,
) -> PairedSliceSet:
    """Like :func:`load_pairs`, with every reference triplet rigidly moved first.

    Pair ``i`` (in load order) is moved by ``transform_for(i)`` over the full
    field of view. The moved slices are then center cropped and scaled by the
    min-max range of the unmoved cropped volume, clipped to [0, 1]. Targets
    are loaded exactly as :func:`load_pairs` loads them.
    """
    pairs: PairedSliceSet = []
    for subject_id in subject_ids:
        entry = manifest.subject(subject_id)
        volume = load_volume(manifest.volume_path(subject_id, reference), entry.dims)
        tgt = load_modality(manifest, subject_id, target, crop)
        if len(tgt) != volume.n_slices:
            raise ValueError(
                f"Reference and target stacks of {subject_id} differ in length: "
                f"{volume.n_slices} vs {len(tgt)}"
            )
        cropped = center_crop(volume.data, crop).astype(np.float64)
        lo, hi = float(cropped.min()), float(cropped.max())
        raw = [s.astype(np.float64) for s in volume.data]
        triplets = build_pairs(raw, raw)

        for i in select_slices(len(triplets), slices_per_subject, slice_range):
            t = transform_for(len(pairs))
            moved = [center_crop(apply_rigid(s, t), crop) for s in triplets[i].reference]
            if hi > lo:
                scaled = [np.clip((m - lo) / (hi - lo), 0.0, 1.0) for m in moved]
            else:
                scaled = [np.zeros_like(m) for m in moved]
            pairs.append(SlicePair((scaled[0], scaled[1], scaled[2]), tgt[i]))
    return pairs


# Splits


class Split(str, Enum):
    """Subject-level data split."""

    TRAIN = "train"
    VALIDATION = "val"
    TEST = "test"


SPLIT_RATIOS = {Split.TRAIN: 0.6, Split.VALIDATION: 0.2, Split.TEST: 0.2}
MIN_SUBJECTS = 5


class SplitSpec(BaseModel):
    """Subject-disjoint 3:1:1 assignment."""

    seed: int
    fold: int = 0
    assignment: dict[str, Split]

    def subjects(self, split: Split) -> list[str]:
        """Subject ids in one split, sorted."""
        return sorted(s for s, assigned in self.assignment.items() if assigned == split)

    @property
    def train(self) -> list[str]:
        return self.subjects(Split.TRAIN)

    @property
    def validation(self) -> list[str]:
        return self.subjects(Split.VALIDATION)

    @property
    def test(self) -> list[str]:
        return self.subjects(Split.TEST)


def split_sizes(total: int) -> dict[Split, int]:
    """Split sizes by largest remainder; ties favour train, then validation."""
    exact = {split: ratio * total for split, ratio in SPLIT_RATIOS.items()}
    sizes = {split: math.floor(value + 1e-9) for split, value in exact.items()}
    leftover = total - sum(sizes.values())
    by_remainder = sorted(SPLIT_RATIOS, key=lambda s: -(exact[s] - sizes[s]))
    for split in by_remainder[:leftover]:
        sizes[split] += 1
    return sizes


def split_subjects(manifest: Manifest, seed: int, fold: int = 0) -> SplitSpec:
    """Seeded shuffle of subject ids, cut into train, validation and test.

    Each fold re-splits with the seed pair ``[seed, fold]``.
    """
    ids = sorted(manifest.ids)
    if len(ids) < MIN_SUBJECTS:
        raise ValueError(f"Need at least {MIN_SUBJECTS} subjects to split, got {len(ids)}")
    rng = np.random.default_rng([seed, fold])
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    sizes = split_sizes(len(ids))

    assignment: dict[str, Split] = {}
    start = 0
    for split in (Split.TRAIN, Split.VALIDATION, Split.TEST):
        for subject_id in shuffled[start : start + sizes[split]]:
            assignment[subject_id] = split
        start += sizes[split]
    return SplitSpec(seed=seed, fold=fold, assignment=assignment)


# Phantoms

PHANTOM_MODALITIES = ("t1", "t2", "flair")
# latent level per tissue class: bulk, gray, fluid, lesion
TISSUE_LEVELS = np.array([0.7, 0.5, 0.1, 0.35])
FLUID_CLASS = 2
EDGE_WIDTH = 0.5
MEMBERSHIP_FLOOR = 0.1
DRIFT_PX = 0.25
TEXTURE_AMPLITUDE = 0.15
# fine striation absent from t1: (row, column) frequency in cycles per pixel
STRIATION_AMPLITUDE = 0.08
STRIATION_FREQUENCY = {"t2": (0.3125, 0.125), "flair": (0.28125, -0.1875)}
STRIATION_DRIFT = 0.2
MIN_PHANTOM_SIZE = 32


class _Ellipse(NamedTuple):
    cy: float
    cx: float
    ry: float
    rx: float
    angle: float
    vy: float
    vx: float
    tissue: int


def contrast_map(modality: str, levels: NDArray[np.float64]) -> NDArray[np.float64]:
    """Tissue intensities of a phantom modality, all within [0.2, 1]."""
    if modality == "t1":
        return 0.2 + 0.8 * levels
    inverted = 0.2 + 0.8 * np.sqrt(1.0 - levels)
    if modality == "t2":
        return inverted
    if modality == "flair":
        suppressed = inverted.copy()
        suppressed[FLUID_CLASS] = 0.2
        return suppressed
    raise ValueError(f"Unknown phantom modality {modality!r} (expected {PHANTOM_MODALITIES})")


def _subject_geometry(rng: np.random.Generator, size: int) -> list[_Ellipse]:
    head = _Ellipse(0.0, 0.0, 0.44 * size, 0.36 * size, 0.0, 0.0, 0.0, 0)
    shapes = [head]
    for _ in range(int(rng.integers(4, 9))):
        radius = 0.18 * size * math.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        ry, rx = rng.uniform(0.05 * size, 0.14 * size, size=2)
        angle = rng.uniform(0.0, math.pi)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        tissue = int(rng.integers(1, len(TISSUE_LEVELS)))
        shapes.append(
            _Ellipse(
                radius * math.sin(phi),
                radius * math.cos(phi),
                float(ry),
                float(rx),
                angle,
                DRIFT_PX * math.sin(heading),
                DRIFT_PX * math.cos(heading),
                tissue,
            )
        )
    return shapes


def _membership(
    shape: _Ellipse, offset: float, yy: NDArray[np.float64], xx: NDArray[np.float64]
) -> NDArray[np.float64]:
    dy = yy - (shape.cy + shape.vy * offset)
    dx = xx - (shape.cx + shape.vx * offset)
    cos, sin = math.cos(shape.angle), math.sin(shape.angle)
    u = cos * dx + sin * dy
    v = -sin * dx + cos * dy
    rho = np.sqrt((u / shape.rx) ** 2 + (v / shape.ry) ** 2)
    m: NDArray[np.float64] = expit((1.0 - rho) * min(shape.rx, shape.ry) / EDGE_WIDTH)
    m[m < MEMBERSHIP_FLOOR] = 0.0
    return m


def _texture(rng: np.random.Generator, shape: tuple[int, int, int]) -> NDArray[np.float64]:
    tex: NDArray[np.float64] = gaussian_filter(rng.standard_normal(shape), sigma=(1.0, 2.0, 2.0))
    peak = float(np.max(np.abs(tex)))
    return tex / peak if peak > 0 else tex


def _striation(
    frequency: tuple[float, float],
    rng: np.random.Generator,
    n_slices: int,
    yy: NDArray[np.float64],
    xx: NDArray[np.float64],
) -> NDArray[np.float64]:
    fy, fx = frequency
    offsets = np.arange(n_slices, dtype=np.float64) - (n_slices - 1) / 2.0
    phase = rng.uniform(0.0, 2.0 * math.pi) + STRIATION_DRIFT * offsets
    wave = 2.0 * math.pi * (fy * yy + fx * xx)
    result: NDArray[np.float64] = np.cos(wave[None] + phase[:, None, None])
    return result


class PhantomDataset(NamedTuple):
    """Generated manifest and volumes keyed by subject id, then modality."""

    manifest: Manifest
    volumes: dict[str, dict[str, NDArray[np.float32]]]


def gen_phantom_pairs(
    n_subjects: int,
    slices_per: int,
    size: int,
    seed: int,
    modalities: Sequence[str] = PHANTOM_MODALITIES,
) -> PhantomDataset:
    """Paired multi-contrast ellipse phantoms sharing one anatomy per subject.

    Each subject has a head ellipse and 4-8 inner ellipses with soft edges
    that drift slowly through the slices. Every modality paints the same
    memberships with its own tissue contrasts. The non-t1 modalities also
    carry a multiplicative texture of their own: smooth noise plus a fine
    striation at a fixed per-modality frequency, which t1 cannot predict.
    """
    if size < MIN_PHANTOM_SIZE:
        raise ValueError(f"Phantom size must be >= {MIN_PHANTOM_SIZE}, got {size}")
    if n_subjects < 1 or slices_per < 1:
        raise ValueError("n_subjects and slices_per must be positive")
    for modality in modalities:
        contrast_map(modality, TISSUE_LEVELS)

    center = (size - 1) / 2.0
    yy, xx = np.meshgrid(
        np.arange(size, dtype=np.float64) - center,
        np.arange(size, dtype=np.float64) - center,
        indexing="ij",
    )
    entries: list[SubjectEntry] = []
    volumes: dict[str, dict[str, NDArray[np.float32]]] = {}

    for index in range(n_subjects):
        subject_id = f"sub-{index:03d}"
        rng = np.random.default_rng([seed, index])
        levels = np.clip(TISSUE_LEVELS + rng.uniform(-0.05, 0.05, TISSUE_LEVELS.size), 0.0, 1.0)
        shapes = _subject_geometry(rng, size)
        contrasts = {m: contrast_map(m, levels) for m in modalities}

        stacks = {m: np.zeros((slices_per, size, size)) for m in modalities}
        for s in range(slices_per):
            offset = s - (slices_per - 1) / 2.0
            for shape in shapes:
                m = _membership(shape, offset, yy, xx)
                for modality in modalities:
                    painted = stacks[modality][s]
                    stacks[modality][s] = painted * (1.0 - m) + contrasts[modality][shape.tissue] * m

        subject_volumes: dict[str, NDArray[np.float32]] = {}
        for modality in modalities:
            stack = stacks[modality]
            if modality != "t1":
                modulation = 1.0 + TEXTURE_AMPLITUDE * _texture(rng, stack.shape)
                if modality in STRIATION_FREQUENCY:
                    modulation += STRIATION_AMPLITUDE * _striation(
                        STRIATION_FREQUENCY[modality], rng, slices_per, yy, xx
                    )
                stack = stack * modulation
            subject_volumes[modality] = np.clip(stack, 0.0, 1.0).astype(VOLUME_DTYPE)
        volumes[subject_id] = subject_volumes
        entries.append(
            SubjectEntry(
                id=subject_id,
                dims=(slices_per, size, size),
                volumes={m: f"{subject_id}_{m}.raw" for m in modalities},
            )
        )
    return PhantomDataset(Manifest(subjects=entries), volumes)


def write_phantom_dataset(
    directory: str | Path,
    n_subjects: int,
    slices_per: int,
    size: int,
    seed: int,
) -> Path:
    """Generate phantoms into a directory; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    dataset = gen_phantom_pairs(n_subjects, slices_per, size, seed)
    for entry in dataset.manifest.subjects:
        for modality, name in entry.volumes.items():
            save_volume(directory / name, dataset.volumes[entry.id][modality])
    manifest_path = directory / "manifest.yaml"
    dataset.manifest.save(manifest_path)
    return manifest_path


# Graymaps


class GrayMap(NamedTuple):
    """A parsed PGM image."""

    data: NDArray[np.integer[Any]]
    maxval: int
    comments: list[str]


def _write_pgm(path: str | Path, values: NDArray[np.integer[Any]], maxval: int, comment: str) -> None:
    height, width = values.shape
    header = f"P5\n# {comment}\n{width} {height}\n{maxval}\n".encode("ascii")
    dtype = ">u2" if maxval > 255 else "u1"
    Path(path).write_bytes(header + values.astype(dtype).tobytes())


def export_map_pgm(values: NDArray[np.floating[Any]], path: str | Path, comment: str = "") -> None:
    """16-bit graymap of a nonnegative map, scaled so its maximum is 65535."""
    arr = np.asarray(values, dtype=np.float64)
    peak = float(arr.max()) if arr.size else 0.0
    scaled = np.rint(arr / peak * 65535.0) if peak > 0 else np.zeros_like(arr)
    dims = f"dims={arr.shape[0]}x{arr.shape[1]}"
    _write_pgm(path, np.clip(scaled, 0, 65535).astype(np.uint16), 65535, f"{comment} {dims}".strip())


def export_mask_pgm(mask: BinaryMask | ProbMask, path: str | Path) -> None:
    """Write a binary mask as an 8-bit 0/255 graymap, or a ProbMask as 16-bit.

    The header comment records R and the grid dims.
    """
    if isinstance(mask, ProbMask):
        export_map_pgm(mask.data, path, comment=f"crossmask R={mask.target_factor:.6g}")
        return
    comment = f"crossmask R={mask.factor:.6g} dims={mask.height}x{mask.width}"
    _write_pgm(path, mask.data.astype(np.uint8) * 255, 255, comment)


def read_pgm(path: str | Path) -> GrayMap:
    """Parse a binary (P5) graymap, 8- or 16-bit."""
    raw = Path(path).read_bytes()
    tokens: list[str] = []
    comments: list[str] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(raw):
            raise ValueError(f"Truncated PGM header in {path}")
        char = raw[pos : pos + 1]
        if char.isspace():
            pos += 1
        elif char == b"#":
            end = raw.find(b"\n", pos)
            end = len(raw) if end < 0 else end
            comments.append(raw[pos + 1 : end].decode("ascii").strip())
            pos = end + 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError(f"Not a binary graymap: {path}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(raw, dtype=dtype, count=width * height, offset=pos + 1)
    return GrayMap(data.reshape(height, width).astype(np.int64), maxval, comments)


def read_mask_pgm(path: str | Path, factor: float | None = None) -> BinaryMask:
    """Load a mask written by :func:`export_mask_pgm`."""
    gray = read_pgm(path)
    data = gray.data > 0
    return BinaryMask(
        data=data, factor=factor if factor is not None else float(data.mean()), kind="file"
    )


# Reports


def _number(value: float) -> str:
    return repr(float(value))


def write_metrics_csv(reports: Sequence[MetricReport], path: str | Path) -> None:
    """Per-slice rows ``pattern, fold, slice, psnr, ssim``; infinite PSNR is written ``inf``."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["pattern", "fold", "slice", "psnr", "ssim"])
        for report in reports:
            for row in report.slices:
                writer.writerow(
                    [report.pattern, report.fold, row.slice_index, _number(row.psnr), _number(row.ssim)]
                )


def read_metrics_csv(path: str | Path) -> list[dict[str, Any]]:
    """Rows of a metrics CSV with numeric fields parsed."""
    with open(path, newline="") as f:
        return [
            {
                "pattern": row["pattern"],
                "fold": int(row["fold"]),
                "slice": int(row["slice"]),
                "psnr": float(row["psnr"]),
                "ssim": float(row["ssim"]),
            }
            for row in csv.DictReader(f)
        ]


def write_json(payload: dict[str, Any], path: str | Path) -> None:
    """Deterministic JSON (sorted keys, fixed indentation)."""
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
