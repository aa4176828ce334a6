"""Experiment runner shared by the ``pipeline`` and ``evaluate`` commands."""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any, NamedTuple, TypeVar

import numpy as np

from crossmask.config import ExperimentConfig, PatternConfig, ReconConfig, ReconKind, TrainConfig
from crossmask.dataio import (
    Manifest,
    SplitSpec,
    export_map_pgm,
    export_mask_pgm,
    load_moved_pairs,
    load_pairs,
    split_subjects,
    write_json,
    write_metrics_csv,
)
from crossmask.errors import StageError, TranslatorError
from crossmask.fourier import Image2D
from crossmask.metrics import PSNRMetric, SSIMMetric
from crossmask.motion import RigidTransform, sample_rigid, transforms_table
from crossmask.optimizer import init_weights, probability_mask, train
from crossmask.patterns import PATTERNS, BinaryMask, create_pattern
from crossmask.probmask import ResidualMap, topk_extract
from crossmask.recon import reconstruct, undersample
from crossmask.results import MetricReport, PatternSummary, RunResult, SliceMetrics
from crossmask.translator import (
    PairedSliceSet,
    TranslatorModel,
    fit_translator,
    normalize_residual,
    residual_map,
    translate_all,
    uniform_prior,
)

logger = logging.getLogger(__name__)

LEARNED = "learned"
TRANSLATION = "translation"
FAILED_MARKER = "FAILED"

T = TypeVar("T")


def pattern_params(kind: str, cfg: PatternConfig) -> dict[str, Any]:
    """Generator parameters of a baseline pattern kind."""
    if kind == "gaussian1d":
        return {"sigma_rows": cfg.sigma_rows}
    if kind == "poisson":
        return {"r0": cfg.r0}
    return {}


def baseline_pattern(
    kind: str, shape: tuple[int, int], factor: float, cfg: PatternConfig, seed: int
) -> BinaryMask:
    """Generate one of the fixed baseline patterns."""
    return create_pattern(kind, **pattern_params(kind, cfg)).generate(*shape, factor, seed)


def targets(pairs: PairedSliceSet) -> list[Image2D]:
    return [pair.target for pair in pairs]


def load_moved_test(
    config: ExperimentConfig, split: SplitSpec, fold: int = 0
) -> tuple[PairedSliceSet, list[RigidTransform]]:
    """Test pairs whose reference triplets move before cropping and normalization.

    Pair ``i`` uses the seed ``[seed + fold, i]``; targets stay in place.
    """
    if not config.data.manifest:
        raise ValueError("data.manifest is not set")
    data, motion = config.data, config.motion
    transforms: list[RigidTransform] = []

    def draw(i: int) -> RigidTransform:
        t = sample_rigid([config.seed + fold, i], motion.t_bound, motion.r_bound)
        transforms.append(t)
        return t

    moved = load_moved_pairs(
        Manifest.load(data.manifest),
        split.test,
        data.reference,
        data.target,
        data.crop,
        draw,
        data.slices_per_subject,
        data.slice_range,
    )
    return moved, transforms


class MaskEvaluator:
    """Under-samples, reconstructs and scores evaluation slices.

    Slices are scored independently; with ``workers > 1`` they run on a
    thread pool and results keep slice order.
    """

    def __init__(
        self,
        recon: ReconConfig,
        translator: TranslatorModel | None = None,
        psnr_standard: bool = False,
        workers: int = 1,
    ) -> None:
        self.recon = recon
        self.translator = translator
        self.psnr = PSNRMetric(standard=psnr_standard)
        self.ssim = SSIMMetric()
        self.workers = workers

    def _map(self, fn: Callable[[int], T], count: int) -> list[T]:
        if self.workers > 1 and count > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(fn, range(count)))
        return [fn(i) for i in range(count)]

    def _require_translator(self) -> TranslatorModel:
        if self.translator is None:
            raise TranslatorError("This evaluation needs a translator model")
        return self.translator

    def _score(self, index: int, ref: Image2D, rec: Image2D) -> SliceMetrics:
        return SliceMetrics(
            slice_index=index,
            psnr=self.psnr.calculate(ref, rec),
            ssim=self.ssim.calculate(ref, rec),
        )

    def evaluate(
        self, mask: BinaryMask, pairs: PairedSliceSet, pattern: str, fold: int = 0
    ) -> MetricReport:
        """Score a mask on every pair's target slice."""
        references: list[Image2D] | None = None
        if self.recon.kind == ReconKind.REFERENCE_FILLED:
            references = translate_all(self._require_translator(), pairs)

        def one(i: int) -> SliceMetrics:
            target = pairs[i].target
            y_u = undersample(target, mask)
            rec = reconstruct(y_u, mask, self.recon, references[i] if references else None)
            return self._score(i, target, rec)

        return MetricReport(
            pattern=pattern, fold=fold, factor=mask.factor, slices=self._map(one, len(pairs))
        )

    def evaluate_translation(self, pairs: PairedSliceSet, fold: int = 0) -> MetricReport:
        """Score the translated reference alone against the target."""
        synthesized = translate_all(self._require_translator(), pairs)
        rows = self._map(lambda i: self._score(i, pairs[i].target, synthesized[i]), len(pairs))
        return MetricReport(pattern=TRANSLATION, fold=fold, slices=rows)


class FoldData(NamedTuple):
    """Slice pairs of one subject split."""

    split: SplitSpec
    train: PairedSliceSet
    validation: PairedSliceSet
    test: PairedSliceSet


def load_fold(config: ExperimentConfig, fold: int = 0) -> FoldData:
    """Split the manifest's subjects for a fold and load their slice pairs."""
    if not config.data.manifest:
        raise ValueError("data.manifest is not set")
    manifest = Manifest.load(config.data.manifest)
    split = split_subjects(manifest, config.seed, fold)
    data = config.data

    def load(subject_ids: Sequence[str]) -> PairedSliceSet:
        return load_pairs(
            manifest,
            subject_ids,
            data.reference,
            data.target,
            data.crop,
            data.slices_per_subject,
            data.slice_range,
        )

    return FoldData(split, load(split.train), load(split.validation), load(split.test))


def fold_train_config(config: ExperimentConfig, fold: int) -> TrainConfig:
    """Training config of a fold: the training seed is offset by the fold index."""
    return config.train.model_copy(update={"seed": config.train.seed + fold})


def residual_prior(raw: ResidualMap) -> tuple[ResidualMap, bool]:
    """Normalized residual, or the uniform prior when the residual is constant."""
    normalized = normalize_residual(raw)
    if normalized.degenerate:
        logger.warning("Residual map is constant; falling back to the uniform prior")
        return uniform_prior((int(raw.shape[0]), int(raw.shape[1]))), True
    return normalized.data, False


class PipelineRunner:
    """Runs the whole experiment for every fold and writes its reports.

    Per fold: fit the translator, build the residual prior, train the weight
    map, extract the learned pattern, then score it and the baselines on the
    test subjects. A failing stage leaves a ``FAILED`` marker next to the
    partial outputs.
    """

    def __init__(self, config: ExperimentConfig, output_dir: str | Path | None = None) -> None:
        self.config = config
        self.output_dir = Path(output_dir if output_dir is not None else config.output_dir)
        self.training: list[dict[str, Any]] = []

    @contextmanager
    def _stage(self, name: str, fold: int | None = None) -> Iterator[None]:
        where = name if fold is None else f"{name} (fold {fold})"
        logger.info("Stage %s started", where)
        try:
            yield
        except StageError:
            raise
        except Exception as e:
            raise StageError(name, e) from e
        logger.info("Stage %s finished", where)

    def run(self) -> RunResult:
        """Run every fold; raises StageError on the first failing stage."""
        cfg = self.config
        self.output_dir.mkdir(parents=True, exist_ok=True)
        marker = self.output_dir / FAILED_MARKER
        marker.unlink(missing_ok=True)
        cfg.save(self.output_dir / "config.yaml")
        (self.output_dir / "seed.log").write_text(f"seed: {cfg.seed}\ntrain_seed: {cfg.train.seed}\n")

        result = RunResult(seed=cfg.seed, config=cfg.model_dump(mode="json", by_alias=True))
        self.training = []
        try:
            for fold in range(cfg.folds):
                self._run_fold(fold, result)
            with self._stage("report"):
                self._write_reports(result)
        except StageError as e:
            marker.write_text(f"stage: {e.stage}\ncause: {e.cause}\n")
            raise
        return result

    def _run_fold(self, fold: int, result: RunResult) -> None:
        cfg = self.config
        fold_dir = self.output_dir / f"fold{fold}"
        fold_dir.mkdir(exist_ok=True)
        train_cfg = fold_train_config(cfg, fold)
        factor = train_cfg.factor

        with self._stage("load", fold):
            data = load_fold(cfg, fold)

        with self._stage("translate-fit", fold):
            translator = fit_translator(data.train, cfg.translator, seed=cfg.seed + fold)
            translator.save(fold_dir / "translator.yaml")

        with self._stage("residual", fold):
            raw = residual_map(translator, data.validation)
            np.save(fold_dir / "residual.npy", raw)
            export_map_pgm(raw, fold_dir / "residual.pgm", comment="crossmask residual")

        with self._stage("normalize", fold):
            r_norm, degenerate = residual_prior(raw)
        shape = (int(r_norm.shape[0]), int(r_norm.shape[1]))

        with self._stage("train", fold):
            state, prob = train(targets(data.train), targets(data.validation), r_norm, train_cfg)
            self.training.append(
                {
                    "fold": fold,
                    "epochs": state.epoch,
                    "best_epoch": state.best_epoch,
                    "best_validation_loss": state.best_loss,
                    "residual_degenerate": degenerate,
                }
            )

        with self._stage("topk", fold):
            learned = topk_extract(prob, factor)
            export_mask_pgm(prob, fold_dir / "probmask.pgm")
            export_mask_pgm(learned, fold_dir / f"{LEARNED}.pgm")

        masks: dict[str, BinaryMask] = {LEARNED: learned}
        with self._stage("baselines", fold):
            for kind in cfg.baselines:
                masks[kind] = self._baseline(kind, shape, r_norm, data, train_cfg, fold)
                export_mask_pgm(masks[kind], fold_dir / f"{kind}.pgm")

        evaluator = MaskEvaluator(
            cfg.recon, translator, psnr_standard=cfg.psnr_standard, workers=cfg.execution.workers
        )
        with self._stage("evaluate", fold):
            for name, mask in masks.items():
                result.add_report(evaluator.evaluate(mask, data.test, name, fold))
            result.add_report(evaluator.evaluate_translation(data.test, fold))

        if cfg.motion.enabled:
            with self._stage("motion", fold):
                moved, transforms = load_moved_test(cfg, data.split, fold)
                np.savetxt(
                    fold_dir / "motion.csv",
                    transforms_table(transforms),
                    delimiter=",",
                    header="slice,dx,dy,theta",
                    comments="",
                    fmt=["%d", "%.17g", "%.17g", "%.17g"],
                )
                for name, mask in masks.items():
                    result.add_report(evaluator.evaluate(mask, moved, name, fold), motion=True)
                result.add_report(evaluator.evaluate_translation(moved, fold), motion=True)

    def _baseline(
        self,
        kind: str,
        shape: tuple[int, int],
        r_norm: ResidualMap,
        data: FoldData,
        train_cfg: TrainConfig,
        fold: int,
    ) -> BinaryMask:
        factor = train_cfg.factor
        if kind in PATTERNS:
            return baseline_pattern(kind, shape, factor, self.config.pattern, self.config.seed + fold)
        if kind == "pi_only":
            w0 = init_weights(*shape, seed=train_cfg.seed, init_range=train_cfg.init_range)
            mask = topk_extract(probability_mask(w0, r_norm, factor), factor)
        else:
            _, prob = train(targets(data.train), targets(data.validation), uniform_prior(shape), train_cfg)
            mask = topk_extract(prob, factor)
        return mask.model_copy(update={"kind": kind})

    def _write_reports(self, result: RunResult) -> None:
        write_metrics_csv(result.reports, self.output_dir / "metrics.csv")
        if result.motion_reports:
            write_metrics_csv(result.motion_reports, self.output_dir / "motion_metrics.csv")
        write_json(build_summary(result, self.config, self.training), self.output_dir / "summary.json")


def _pattern_entry(summary: PatternSummary) -> dict[str, Any]:
    return {
        "psnr": summary.psnr.model_dump(),
        "ssim": summary.ssim.model_dump(),
        "psnr_text": summary.psnr.format(2),
        "ssim_text": summary.ssim.format(4),
        "folds": summary.folds,
    }


def build_summary(
    result: RunResult, config: ExperimentConfig, training: list[dict[str, Any]] | None = None
) -> dict[str, Any]:
    """JSON summary: per-pattern ``mean (std)`` over folds plus every fold report."""
    summary: dict[str, Any] = {
        "seed": result.seed,
        "factor": config.train.factor,
        "folds": config.folds,
        "recon": config.recon.kind.value,
        "translator": config.translator.kind.value,
        "patterns": {s.pattern: _pattern_entry(s) for s in result.aggregate()},
        "reports": [r.summary() for r in result.reports],
        "training": training or [],
    }
    if result.motion_reports:
        summary["motion"] = {
            "patterns": {s.pattern: _pattern_entry(s) for s in result.aggregate(motion=True)},
            "psnr_drop": result.motion_drop(),
            "reports": [r.summary() for r in result.motion_reports],
        }
    return summary
