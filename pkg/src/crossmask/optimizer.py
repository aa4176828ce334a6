"""Joint refinement of the sampling weight map.

The weight map ``w`` adjusts the residual prior; Adam updates it through the
soft-binarized mask and the zero-filled reconstruction. Gradients are
analytic (see :func:`grad_w`), so no autodiff framework is needed.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from crossmask.config import ThresholdResample, TrainConfig
from crossmask.errors import check_shape
from crossmask.fourier import Image2D, KSpace2D, fft2_centered, ifft2_centered
from crossmask.probmask import (
    ProbMask,
    ResidualMap,
    ThresholdMatrix,
    WeightMap,
    adjusted_mass,
    sample_thresholds,
    scale_to_factor,
    soft_binarize,
)

logger = logging.getLogger(__name__)

MEAN_TOLERANCE = 1e-12


class TrainState(BaseModel):
    """Learnable weights, Adam moments and the best-validation checkpoint."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w: NDArray[np.float64]
    m1: NDArray[np.float64]
    m2: NDArray[np.float64]
    step: int = 0
    epoch: int = 0
    rng_state: dict[str, Any] = Field(default_factory=dict)
    best_loss: float = float("inf")
    best_p: NDArray[np.float64] | None = None
    best_epoch: int | None = None
    stale_epochs: int = 0
    train_history: list[float] = Field(default_factory=list)
    val_history: list[float] = Field(default_factory=list)

    @classmethod
    def fresh(cls, w: WeightMap) -> TrainState:
        """State at step 0 for an initial weight map."""
        return cls(w=w, m1=np.zeros_like(w), m2=np.zeros_like(w))


class ForwardCache(NamedTuple):
    """Intermediates of :func:`forward_loss` needed by :func:`grad_w`."""

    w: WeightMap
    pre_relu: NDArray[np.float64]
    mass: NDArray[np.float64]
    prob: NDArray[np.float64]
    soft: NDArray[np.float64]
    kspace: KSpace2D
    recon: NDArray[np.complex128]
    magnitude: NDArray[np.float64]
    images: NDArray[np.float64]
    factor: float
    sigma_p: float


def init_weights(height: int, width: int, seed: int, init_range: float = 0.1) -> WeightMap:
    """Uniform weights on ``[-init_range, init_range]`` shifted to mean exactly zero."""
    rng = np.random.default_rng(seed)
    w = rng.uniform(-init_range, init_range, size=(height, width))
    w -= w.mean()
    return w


def _stack(batch: Sequence[Image2D] | NDArray[np.float64]) -> NDArray[np.float64]:
    images = np.asarray(batch, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if images.shape[0] == 0:
        raise ValueError("Batch is empty")
    return images


def forward_loss(
    w: WeightMap,
    r_norm: ResidualMap,
    batch: Sequence[Image2D] | NDArray[np.float64],
    th: ThresholdMatrix,
    cfg: TrainConfig,
) -> tuple[float, ForwardCache]:
    """Reconstruction loss of a batch under the soft mask derived from ``w``.

    ``loss = 1/(2n) * sum_i mean((|F^-1(M_soft * F(x_i))| - x_i)^2)``.

    Raises:
        DegenerateMassError: If the adjusted mass is identically zero.
    """
    images = _stack(batch)
    check_shape("batch images", images.shape[1:], np.shape(w))

    pre_relu = np.clip(w, -1.0, 1.0) + r_norm
    mass = adjusted_mass(w, r_norm)
    prob = scale_to_factor(mass, cfg.factor).data
    soft = soft_binarize(prob, th, cfg.sigma_p)

    kspace = fft2_centered(images)
    recon = ifft2_centered(soft * kspace)
    mag = np.abs(recon)

    n = images.shape[0]
    loss = float(np.sum(np.mean((mag - images) ** 2, axis=(1, 2))) / (2 * n))
    cache = ForwardCache(
        w=w,
        pre_relu=pre_relu,
        mass=mass,
        prob=prob,
        soft=soft,
        kspace=kspace,
        recon=recon,
        magnitude=mag,
        images=images,
        factor=cfg.factor,
        sigma_p=cfg.sigma_p,
    )
    return loss, cache


def grad_w(cache: ForwardCache) -> NDArray[np.float64]:
    """Exact gradient of the forward loss with respect to ``w``.

    Chain: squared error -> magnitude (zero subgradient where the complex value
    is exactly 0) -> inverse transform (adjoint is the forward transform) ->
    mask product -> sigmoid -> mean scaling -> ReLU -> clip.
    """
    n = cache.images.shape[0]
    size = cache.w.size

    d_mag = (cache.magnitude - cache.images) / (n * size)
    safe = np.where(cache.magnitude > 0.0, cache.magnitude, 1.0)
    d_recon = np.where(cache.magnitude > 0.0, d_mag * cache.recon / safe, 0.0)
    d_masked = fft2_centered(d_recon)
    d_soft = np.sum(np.real(d_masked * np.conj(cache.kspace)), axis=0)

    d_prob = d_soft * cache.sigma_p * cache.soft * (1.0 - cache.soft)

    mean_mass = float(cache.mass.mean())
    d_mass = (cache.factor / mean_mass) * d_prob - (
        cache.factor / (size * mean_mass**2)
    ) * float(np.sum(d_prob * cache.mass))

    d_pre = d_mass * (cache.pre_relu > 0.0)
    result: NDArray[np.float64] = d_pre * (np.abs(cache.w) < 1.0)
    return result


def adam_step(state: TrainState, grad: NDArray[np.float64], cfg: TrainConfig) -> TrainState:
    """One bias-corrected Adam update; returns a new state."""
    check_shape("gradient", np.shape(grad), state.w.shape)
    step = state.step + 1
    m1 = cfg.beta1 * state.m1 + (1.0 - cfg.beta1) * grad
    m2 = cfg.beta2 * state.m2 + (1.0 - cfg.beta2) * grad**2
    m1_hat = m1 / (1.0 - cfg.beta1**step)
    m2_hat = m2 / (1.0 - cfg.beta2**step)
    w = state.w - cfg.lr * m1_hat / (np.sqrt(m2_hat) + cfg.epsilon)
    return state.model_copy(update={"w": w, "m1": m1, "m2": m2, "step": step})


def probability_mask(w: WeightMap, r_norm: ResidualMap, factor: float) -> ProbMask:
    """The probabilistic mask P implied by a weight map."""
    return scale_to_factor(adjusted_mass(w, r_norm), factor)


EpochCallback = Callable[[TrainState], None]


def train(
    train_set: Sequence[Image2D] | NDArray[np.float64],
    validation_set: Sequence[Image2D] | NDArray[np.float64],
    r_norm: ResidualMap,
    cfg: TrainConfig,
    state: TrainState | None = None,
    on_epoch: EpochCallback | None = None,
) -> tuple[TrainState, ProbMask]:
    """Optimize the weight map with Adam and return the best-validation P.

    Batches are drawn from a seeded shuffle each epoch. The threshold matrix is
    redrawn per step (or per epoch); validation uses one fixed matrix seeded
    once, so the model-selection loss is deterministic. Training runs at least
    ``min_epochs`` and stops at ``max_epochs`` or once validation loss has not
    improved for ``patience`` consecutive epochs.

    Passing a ``state`` from a checkpoint resumes the same trajectory.
    """
    train_images = _stack(train_set)
    val_images = _stack(validation_set)
    shape = (int(r_norm.shape[0]), int(r_norm.shape[1]))
    check_shape("training images", train_images.shape[1:], shape)
    check_shape("validation images", val_images.shape[1:], shape)

    rng = np.random.default_rng(cfg.seed)
    if state is None:
        state = TrainState.fresh(init_weights(*shape, seed=cfg.seed, init_range=cfg.init_range))
    elif state.rng_state:
        rng.bit_generator.state = state.rng_state

    val_th = sample_thresholds(shape, np.random.default_rng([cfg.seed, 1]))
    n_train = train_images.shape[0]

    while state.epoch < cfg.max_epochs:
        order = rng.permutation(n_train)
        th = sample_thresholds(shape, rng)
        batch_losses = []
        for start in range(0, n_train, cfg.batch_size):
            if cfg.threshold_resample == ThresholdResample.PER_STEP and start > 0:
                th = sample_thresholds(shape, rng)
            batch = train_images[order[start : start + cfg.batch_size]]
            loss, cache = forward_loss(state.w, r_norm, batch, th, cfg)
            state = adam_step(state, grad_w(cache), cfg)
            batch_losses.append(loss)

        prob = probability_mask(state.w, r_norm, cfg.factor)
        if abs(prob.mean - cfg.factor) > MEAN_TOLERANCE * max(cfg.factor, 1.0):
            raise AssertionError(f"mean(P) drifted from R: {prob.mean} != {cfg.factor}")

        val_loss, _ = forward_loss(state.w, r_norm, val_images, val_th, cfg)
        train_loss = float(np.mean(batch_losses))
        update: dict[str, Any] = {
            "epoch": state.epoch + 1,
            "train_history": [*state.train_history, train_loss],
            "val_history": [*state.val_history, val_loss],
            "rng_state": rng.bit_generator.state,
        }
        if val_loss < state.best_loss:
            update.update(
                best_loss=val_loss, best_p=prob.data.copy(), best_epoch=state.epoch + 1, stale_epochs=0
            )
            logger.debug("Epoch %d: new best validation loss %.6e", state.epoch + 1, val_loss)
        else:
            update["stale_epochs"] = state.stale_epochs + 1
        state = state.model_copy(update=update)
        logger.debug(
            "Epoch %d: train %.6e, validation %.6e", state.epoch, train_loss, val_loss
        )

        if on_epoch is not None:
            on_epoch(state)
        if state.epoch >= cfg.min_epochs and state.stale_epochs >= cfg.patience:
            logger.debug("Validation loss stalled for %d epochs; stopping", state.stale_epochs)
            break

    if state.best_p is None:
        raise RuntimeError("Training finished without a validation checkpoint")
    return state, ProbMask(data=state.best_p, target_factor=cfg.factor)


def save_checkpoint(path: str | Path, state: TrainState, cfg: TrainConfig) -> None:
    """Write the training state to an ``.npz`` archive."""
    arrays: dict[str, Any] = {
        "w": state.w,
        "m1": state.m1,
        "m2": state.m2,
        "best_p": state.best_p if state.best_p is not None else np.zeros(0),
        "train_history": np.asarray(state.train_history, dtype=np.float64),
        "val_history": np.asarray(state.val_history, dtype=np.float64),
    }
    meta = {
        "step": state.step,
        "epoch": state.epoch,
        "best_loss": state.best_loss,
        "best_epoch": state.best_epoch,
        "stale_epochs": state.stale_epochs,
        "rng_state": state.rng_state,
        "config_hash": cfg.config_hash(),
        "config": cfg.model_dump(mode="json"),
    }
    with open(path, "wb") as f:
        np.savez(f, meta=np.asarray(json.dumps(meta, sort_keys=True)), **arrays)


class Checkpoint(NamedTuple):
    """A loaded checkpoint: state, the config hash it was written with, and the config."""

    state: TrainState
    config_hash: str
    config: TrainConfig


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        best_p = archive["best_p"]
        state = TrainState(
            w=archive["w"],
            m1=archive["m1"],
            m2=archive["m2"],
            step=meta["step"],
            epoch=meta["epoch"],
            rng_state=meta["rng_state"],
            best_loss=meta["best_loss"],
            best_p=best_p if best_p.size else None,
            best_epoch=meta["best_epoch"],
            stale_epochs=meta["stale_epochs"],
            train_history=archive["train_history"].tolist(),
            val_history=archive["val_history"].tolist(),
        )
    return Checkpoint(state, meta["config_hash"], TrainConfig.model_validate(meta["config"]))
