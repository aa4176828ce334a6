"""Command-line interface for crossmask."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, NoReturn

import click
import numpy as np
import yaml
from pydantic import ValidationError
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from crossmask.config import (
    ExperimentConfig,
    ReconConfig,
    ReconKind,
    Regularizer,
    generate_default_config,
)
from crossmask.errors import StageError
from crossmask.results import RunResult

console = Console()
logger = logging.getLogger("crossmask")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def setup_logging(verbose: bool) -> None:
    """Configure logging with rich handler."""
    # Only configure the crossmask logger, not root
    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)
    handler = RichHandler(console=console, show_time=False, show_path=False)
    handler.setFormatter(logging.Formatter("%(message)s"))

    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def _config_error(error: Any) -> NoReturn:
    console.print(f"[red]Config error:[/red] {error}")
    sys.exit(EXIT_CONFIG)


def _runtime_error(stage: str, error: BaseException) -> NoReturn:
    console.print(f"[red]Stage '{stage}' failed:[/red] {error}")
    sys.exit(EXIT_RUNTIME)


def _print_seed(seed: int) -> None:
    console.print(f"[dim]Seed:[/dim] {seed}")


def _load_config(path: str | None, overrides: dict[tuple[str, ...], Any] | None = None) -> ExperimentConfig:
    """Load the experiment config and apply command-line overrides.

    Keys are paths into the YAML structure; ``None`` values are skipped.
    Any failure exits with the config-error code.
    """
    try:
        data = ExperimentConfig.load(path).model_dump(mode="json", by_alias=True)
        for keys, value in (overrides or {}).items():
            if value is None:
                continue
            node = data
            for key in keys[:-1]:
                node = node.setdefault(key, {})
            node[keys[-1]] = value
        return ExperimentConfig.model_validate(data)
    except (ValidationError, FileNotFoundError, yaml.YAMLError, ValueError) as e:
        _config_error(e)


def _seed_overrides(seed: int | None) -> dict[tuple[str, ...], Any]:
    return {("seed",): seed, ("train", "seed"): seed}


@click.group()
@click.version_option()
@click.option("--verbose", "-v", is_flag=True, help="Verbose output")
def main(verbose: bool) -> None:
    """Crossmask - residual-guided k-space under-sampling for multi-contrast MRI."""
    setup_logging(verbose)


@main.command()
@click.option("--force", "-f", is_flag=True, help="Overwrite existing files")
def init(force: bool) -> None:
    """Write a default crossmask.yaml."""
    config_path = Path("crossmask.yaml")

    if config_path.exists() and not force:
        console.print(f"[yellow]Config file already exists: {config_path}[/yellow]")
        console.print("Use --force to overwrite")
        return

    config_path.write_text(generate_default_config())
    console.print(f"[green]Created:[/green] {config_path}")
    console.print()
    console.print(
        Panel(
            "[bold]Project initialized![/bold]\n\n"
            "Next steps:\n"
            "1. Run [cyan]crossmask gen-phantom -o data[/cyan] or point "
            "[cyan]data.manifest[/cyan] at your own volumes\n"
            "2. Run [cyan]crossmask validate[/cyan]\n"
            "3. Run [cyan]crossmask pipeline[/cyan]",
            title="Crossmask",
            border_style="green",
        )
    )


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
def validate(config: str | None) -> None:
    """Validate the configuration and its manifest."""
    from crossmask.dataio import Manifest

    cfg = _load_config(config)
    console.print("[green]✓[/green] Config file is valid")
    try:
        cfg.validate_paths()
    except FileNotFoundError as e:
        _config_error(e)
    if not cfg.data.manifest:
        console.print("[yellow]No data.manifest configured[/yellow]")
        return

    try:
        manifest = Manifest.load(cfg.data.manifest)
    except (ValidationError, yaml.YAMLError, OSError) as e:
        _config_error(e)

    missing = [
        f"{entry.id}/{modality}"
        for entry in manifest.subjects
        for modality in (cfg.data.reference, cfg.data.target)
        if modality not in entry.volumes
        or not manifest.volume_path(entry.id, modality).exists()
    ]
    if missing:
        _config_error(f"Missing volumes: {', '.join(missing)}")
    console.print(
        f"[green]✓[/green] Manifest lists {len(manifest.subjects)} subject(s) with "
        f"{cfg.data.reference} and {cfg.data.target} volumes"
    )


@main.command("gen-phantom")
@click.option("--output", "-o", type=click.Path(), required=True, help="Output directory")
@click.option("--subjects", type=int, default=20, show_default=True)
@click.option("--slices", type=int, default=8, show_default=True, help="Slices per subject")
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gen_phantom(output: str, subjects: int, slices: int, size: int, seed: int) -> None:
    """Generate a paired multi-contrast phantom dataset."""
    from crossmask.dataio import write_phantom_dataset

    _print_seed(seed)
    try:
        manifest_path = write_phantom_dataset(output, subjects, slices, size, seed)
    except ValueError as e:
        _config_error(e)
    console.print(f"[green]Created:[/green] {manifest_path}")


@main.command("generate-pattern")
@click.option(
    "--kind",
    type=click.Choice(["gaussian1d", "center", "poisson", "learned"]),
    required=True,
)
@click.option("--size", type=int, default=None, help="Square grid size")
@click.option("--height", type=int, default=None)
@click.option("--width", type=int, default=None)
@click.option("--r", "factor", type=float, default=None, help="Under-sampling factor [default: 0.25]")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sigma-rows", type=float, default=None, help="Row std for gaussian1d")
@click.option("--r0", type=float, default=1.0, show_default=True, help="Base radius for poisson")
@click.option("--checkpoint", type=click.Path(exists=True), default=None, help="Optimizer checkpoint")
@click.option("--output", "-o", type=click.Path(), default=None, help="Graymap path")
def generate_pattern(
    kind: str,
    size: int | None,
    height: int | None,
    width: int | None,
    factor: float | None,
    seed: int,
    sigma_rows: float | None,
    r0: float,
    checkpoint: str | None,
    output: str | None,
) -> None:
    """Generate an under-sampling pattern graymap with a JSON sidecar."""
    from crossmask.config import PatternConfig
    from crossmask.dataio import export_mask_pgm
    from crossmask.errors import BracketError
    from crossmask.optimizer import load_checkpoint
    from crossmask.patterns import BinaryMask
    from crossmask.pipeline import baseline_pattern
    from crossmask.probmask import topk_extract

    _print_seed(seed)
    mask: BinaryMask
    try:
        if kind == "learned":
            if checkpoint is None:
                raise click.UsageError("--kind learned requires --checkpoint")
            loaded = load_checkpoint(checkpoint)
            if loaded.state.best_p is None:
                raise click.UsageError(f"Checkpoint {checkpoint} holds no validated mask yet")
            r = factor if factor is not None else loaded.config.factor
            mask = topk_extract(loaded.state.best_p, r).model_copy(update={"kind": "learned"})
        else:
            h = height or size
            w = width or size
            if h is None or w is None:
                raise click.UsageError("Give --size or both --height and --width")
            params = PatternConfig(sigma_rows=sigma_rows, r0=r0)
            r = factor if factor is not None else 0.25
            mask = baseline_pattern(kind, (h, w), r, params, seed)
    except (ValueError, ValidationError) as e:
        _config_error(e)
    except BracketError as e:
        _runtime_error("generate-pattern", e)

    path = Path(output or f"{kind}.pgm")
    export_mask_pgm(mask, path)
    sidecar = {
        "kind": kind,
        "R": r,
        "seed": seed,
        "count": mask.count,
        "height": mask.height,
        "width": mask.width,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    console.print(f"[green]Created:[/green] {path} ({mask.count} samples)")


@main.command("fit-translator")
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--output", "-o", type=click.Path(), default="translator.yaml", show_default=True)
def fit_translator_cmd(config: str | None, fold: int, seed: int | None, output: str) -> None:
    """Fit the configured translator on the training subjects of a fold."""
    from crossmask.pipeline import load_fold
    from crossmask.translator import fit_translator, translation_loss

    cfg = _load_config(config, _seed_overrides(seed))
    _print_seed(cfg.seed)
    try:
        data = load_fold(cfg, fold)
        model = fit_translator(data.train, cfg.translator, seed=cfg.seed + fold)
        loss = translation_loss(model, data.validation)
    except Exception as e:
        _runtime_error("translate-fit", e)
    model.save(output)
    console.print(f"Validation translation MSE: {loss:.6e}")
    console.print(f"[green]Created:[/green] {output}")


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
@click.option("--translator", "translator_path", type=click.Path(exists=True), required=True)
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--output", "-o", type=click.Path(), default="residual", show_default=True,
              help="Output prefix (.npy and .pgm are written)")
def residual(
    config: str | None, translator_path: str, fold: int, seed: int | None, output: str
) -> None:
    """Compute the k-space residual map on the validation subjects."""
    from crossmask.dataio import export_map_pgm
    from crossmask.pipeline import load_fold
    from crossmask.translator import TranslatorModel, residual_map

    cfg = _load_config(config, _seed_overrides(seed))
    _print_seed(cfg.seed)
    try:
        model = TranslatorModel.load(translator_path)
    except (ValidationError, yaml.YAMLError) as e:
        _config_error(e)
    try:
        data = load_fold(cfg, fold)
        raw = residual_map(model, data.validation)
    except Exception as e:
        _runtime_error("residual", e)
    np.save(f"{output}.npy", raw)
    export_map_pgm(raw, f"{output}.pgm", comment="crossmask residual")
    console.print(f"[green]Created:[/green] {output}.npy, {output}.pgm")


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
@click.option("--residual", "residual_path", type=click.Path(exists=True), required=True,
              help="Residual map (.npy)")
@click.option("--checkpoint", type=click.Path(), default="checkpoint.npz", show_default=True)
@click.option("--resume", is_flag=True, help="Continue from an existing checkpoint")
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--r", "factor", type=float, default=None, help="Override train.R")
def optimize(
    config: str | None,
    residual_path: str,
    checkpoint: str,
    resume: bool,
    fold: int,
    seed: int | None,
    factor: float | None,
) -> None:
    """Optimize the sampling weight map, checkpointing every epoch."""
    from crossmask.dataio import export_mask_pgm
    from crossmask.optimizer import TrainState, load_checkpoint, save_checkpoint, train
    from crossmask.pipeline import fold_train_config, load_fold, residual_prior, targets
    from crossmask.probmask import topk_extract

    cfg = _load_config(config, {**_seed_overrides(seed), ("train", "R"): factor})
    train_cfg = fold_train_config(cfg, fold)
    _print_seed(train_cfg.seed)

    state: TrainState | None = None
    if resume and Path(checkpoint).exists():
        loaded = load_checkpoint(checkpoint)
        if loaded.config_hash != train_cfg.config_hash():
            _config_error(f"Checkpoint {checkpoint} was written with a different training config")
        state = loaded.state
        console.print(f"Resuming at epoch {state.epoch}")

    def on_epoch(current: TrainState) -> None:
        save_checkpoint(checkpoint, current, train_cfg)

    try:
        r_norm, _ = residual_prior(np.load(residual_path))
        data = load_fold(cfg, fold)
        state, prob = train(
            targets(data.train), targets(data.validation), r_norm, train_cfg, state, on_epoch
        )
    except Exception as e:
        _runtime_error("train", e)

    out_dir = Path(checkpoint).parent
    export_mask_pgm(prob, out_dir / "probmask.pgm")
    export_mask_pgm(topk_extract(prob, train_cfg.factor), out_dir / "learned.pgm")
    console.print(
        f"Best validation loss {state.best_loss:.6e} at epoch {state.best_epoch} "
        f"({state.epoch} epochs)"
    )
    console.print(f"[green]Created:[/green] {checkpoint}")


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
@click.option(
    "--output",
    "-o",
    type=click.Path(),
    envvar="CROSSMASK_OUTPUT_DIR",
    default=None,
    help="Report directory [default: output_dir from config]",
)
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--r", "factor", type=float, default=None, help="Override train.R")
@click.option("--baselines", "-b", multiple=True, help="Baselines to compare (or 'all')")
@click.option("--folds", type=int, default=None, help="Re-split this many times")
@click.option("--motion", is_flag=True, help="Also evaluate with moved references")
@click.option("--psnr-standard", is_flag=True, help="Square the PSNR peak")
@click.option("--workers", "-w", type=int, default=None, help="Worker threads for evaluation")
def pipeline(
    config: str | None,
    output: str | None,
    seed: int | None,
    factor: float | None,
    baselines: tuple[str, ...],
    folds: int | None,
    motion: bool,
    psnr_standard: bool,
    workers: int | None,
) -> None:
    """Run the full experiment and write its reports."""
    from crossmask.pipeline import PipelineRunner

    cfg = _load_config(
        config,
        {
            **_seed_overrides(seed),
            ("train", "R"): factor,
            ("baselines",): list(baselines) or None,
            ("folds",): folds,
            ("motion", "enabled"): motion or None,
            ("psnr_standard",): psnr_standard or None,
            ("execution", "workers"): workers,
        },
    )
    _print_seed(cfg.seed)
    runner = PipelineRunner(cfg, output)
    try:
        result = runner.run()
    except StageError as e:
        _runtime_error(e.stage, e.cause)

    console.print()
    _print_summary(result)
    console.print(f"[dim]Reports written to: {runner.output_dir}[/dim]")


def _print_summary(result: RunResult) -> None:
    """Print per-pattern mean (std) over folds."""
    table = Table(box=box.SIMPLE)
    table.add_column("Pattern", style="bold")
    table.add_column("PSNR (dB)", justify="right")
    table.add_column("SSIM", justify="right")

    for summary in result.aggregate():
        table.add_row(summary.pattern, summary.psnr.format(2), summary.ssim.format(4))
    console.print(Panel(table, title="Results", border_style="blue"))

    drops = result.motion_drop()
    if drops:
        lines = "\n".join(f"{name}: {drop:.2f} dB" for name, drop in drops.items())
        console.print(Panel(lines, title="PSNR drop under motion", border_style="yellow"))


def _load_slices(volume_path: str, shape: tuple[int, int]) -> list[Any]:
    from crossmask.dataio import load_volume, preprocess, read_volume_header

    volume = load_volume(volume_path, read_volume_header(volume_path))
    return preprocess(volume, crop=shape).slices


@main.command()
@click.option("--volume", type=click.Path(exists=True), required=True, help="Raw float32 volume")
@click.option("--mask", "mask_path", type=click.Path(exists=True), required=True, help="Mask graymap")
@click.option("--output", "-o", type=click.Path(), default="kspace.npy", show_default=True)
def undersample(volume: str, mask_path: str, output: str) -> None:
    """Retrospectively under-sample every slice of a volume."""
    from crossmask.dataio import read_mask_pgm
    from crossmask.recon import undersample as undersample_slice

    try:
        mask = read_mask_pgm(mask_path)
        slices = _load_slices(volume, mask.shape)
    except ValueError as e:
        _config_error(e)
    kspace = np.stack([undersample_slice(s, mask) for s in slices])
    np.save(output, kspace)
    console.print(f"[green]Created:[/green] {output} ({len(slices)} slices)")


@main.command()
@click.option("--kspace", type=click.Path(exists=True), required=True, help="Under-sampled k-space (.npy)")
@click.option("--mask", "mask_path", type=click.Path(exists=True), required=True, help="Mask graymap")
@click.option("--kind", type=click.Choice([k.value for k in ReconKind]), default="zero_filled",
              show_default=True)
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--regularizer", type=click.Choice([r.value for r in Regularizer]), default="identity",
              show_default=True)
@click.option("--reference", type=click.Path(exists=True), default=None,
              help="Volume of translated reference slices (reference_filled)")
@click.option("--output", "-o", type=click.Path(), default="recon.raw", show_default=True)
def reconstruct(
    kspace: str,
    mask_path: str,
    kind: str,
    lam: float,
    regularizer: str,
    reference: str | None,
    output: str,
) -> None:
    """Reconstruct magnitude images from under-sampled k-space."""
    from crossmask.dataio import read_mask_pgm, save_volume
    from crossmask.recon import reconstruct as reconstruct_slice

    try:
        recon_cfg = ReconConfig.model_validate(
            {"kind": kind, "lambda": lam, "regularizer": regularizer}
        )
        mask = read_mask_pgm(mask_path)
        stack = np.load(kspace)
        if stack.ndim == 2:
            stack = stack[None]
        references = _load_slices(reference, mask.shape) if reference else None
        if recon_cfg.kind == ReconKind.REFERENCE_FILLED and references is None:
            raise click.UsageError("--kind reference_filled requires --reference")
        images = [
            reconstruct_slice(y, mask, recon_cfg, references[i] if references else None)
            for i, y in enumerate(stack)
        ]
    except (ValueError, ValidationError) as e:
        _config_error(e)
    save_volume(output, np.stack(images))
    console.print(f"[green]Created:[/green] {output}")


@main.command()
@click.option("--config", "-c", type=click.Path(exists=True), help="Config file path")
@click.option("--mask", "mask_path", type=click.Path(exists=True), required=True, help="Mask graymap")
@click.option("--translator", "translator_path", type=click.Path(exists=True), default=None,
              help="Translator model (needed for reference_filled)")
@click.option("--fold", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed")
@click.option("--pattern", default=None, help="Pattern name in the report [default: mask file stem]")
@click.option("--psnr-standard", is_flag=True, help="Square the PSNR peak")
@click.option("--output", "-o", type=click.Path(), default="evaluation", show_default=True,
              help="Report directory")
def evaluate(
    config: str | None,
    mask_path: str,
    translator_path: str | None,
    fold: int,
    seed: int | None,
    pattern: str | None,
    psnr_standard: bool,
    output: str,
) -> None:
    """Score a mask on the test subjects of a fold."""
    from crossmask.dataio import read_mask_pgm, write_json, write_metrics_csv
    from crossmask.pipeline import MaskEvaluator, load_fold
    from crossmask.translator import TranslatorModel

    cfg = _load_config(config, {**_seed_overrides(seed), ("psnr_standard",): psnr_standard or None})
    _print_seed(cfg.seed)
    try:
        mask = read_mask_pgm(mask_path)
        translator = TranslatorModel.load(translator_path) if translator_path else None
    except (ValueError, ValidationError, yaml.YAMLError) as e:
        _config_error(e)

    evaluator = MaskEvaluator(
        cfg.recon, translator, psnr_standard=cfg.psnr_standard, workers=cfg.execution.workers
    )
    name = pattern or Path(mask_path).stem
    try:
        data = load_fold(cfg, fold)
        report = evaluator.evaluate(mask, data.test, name, fold)
    except Exception as e:
        _runtime_error("evaluate", e)

    out_dir = Path(output)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv([report], out_dir / "metrics.csv")
    write_json(report.summary(), out_dir / "summary.json")
    console.print(
        f"{name}: PSNR {report.psnr.format(2)} dB, SSIM {report.ssim.format(4)} "
        f"over {report.total} slices"
    )


@main.command("augment-motion")
@click.option("--volume", type=click.Path(exists=True), required=True, help="Raw float32 volume")
@click.option("--output", "-o", type=click.Path(), required=True, help="Output volume path")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--t-bound", type=float, default=5.0, show_default=True, help="Max shift (px)")
@click.option("--r-bound", type=float, default=5.0, show_default=True, help="Max rotation (deg)")
def augment_motion(volume: str, output: str, seed: int, t_bound: float, r_bound: float) -> None:
    """Move every slice of a volume by a random rigid transform."""
    from crossmask.dataio import load_volume, read_volume_header, save_volume
    from crossmask.motion import augment_slices, transforms_table

    _print_seed(seed)
    try:
        source = load_volume(volume, read_volume_header(volume))
        moved, transforms = augment_slices(list(source.data.astype(np.float64)), seed, t_bound, r_bound)
    except ValueError as e:
        _config_error(e)
    save_volume(output, np.stack(moved))
    sidecar = Path(output).with_name(Path(output).name + ".motion.csv")
    np.savetxt(
        sidecar,
        transforms_table(transforms),
        delimiter=",",
        header="slice,dx,dy,theta",
        comments="",
        fmt=["%d", "%.17g", "%.17g", "%.17g"],
    )
    console.print(f"[green]Created:[/green] {output}, {sidecar}")


if __name__ == "__main__":
    main()
