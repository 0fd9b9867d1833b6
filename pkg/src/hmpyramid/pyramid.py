"""Multi-resolution weight initialization.

A square image is rendered at each hidden layer's side length by area-weighted
box downsampling, and the machine is grown stage by stage: stage t treats
layer L-t as the visible layer, clamps it to the matching rendering, and
trains only the newly added bottom weight pair while everything above stays
frozen.  After the last stage the full-resolution images optionally fine-tune
the whole stack.

Random streams, all keyed under the pretraining seed: stream 0 seeds random
stage initialization, stream t (1..L) drives stage-t training, stream L+1
drives fine-tuning, and streams 1000+t / 1000+L+1 drive stochastic
binarization of the corresponding stage's data.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np

from .errors import ArchitectureError, DimensionError
from .machine import (
    INIT_STREAM_ID,
    Architecture,
    HelmholtzMachine,
    TrainConfig,
    make_rng,
    train,
)
from .numerics import bernoulli

__all__ = [
    "StageConfig",
    "downsample",
    "build_pyramid",
    "binarize",
    "stage_visible_sides",
    "pyramid_pretrain",
]

BINARIZE_STREAM_BASE = 1000


@dataclass(frozen=True)
class StageConfig:
    """Schedule for staged pretraining.

    ``init`` sets the weights the stages start from; stage and fine-tune
    epochs count full passes over the stage's rendering of the data.
    ``finetune_learning_rate`` of None reuses the stage rate.
    """

    stage_epochs: int
    stage_learning_rate: float = 0.01
    finetune_epochs: int = 0
    finetune_learning_rate: float | None = None
    binarize_mode: str = "threshold"
    threshold: float = 0.5
    init: str = "zero"
    init_sigma: float = 0.05
    shuffle: bool = True

    def __post_init__(self):
        if self.stage_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if not self.stage_learning_rate > 0:
            raise ValueError("stage_learning_rate must be positive")
        if self.finetune_learning_rate is not None and not self.finetune_learning_rate > 0:
            raise ValueError("finetune_learning_rate must be positive")
        if self.binarize_mode not in ("threshold", "stochastic"):
            raise ValueError(f"unknown binarize_mode {self.binarize_mode!r}")
        if self.init not in ("zero", "random"):
            raise ValueError(f"stage init must be 'zero' or 'random', got {self.init!r}")


def _box_weights(src: int, dst: int) -> np.ndarray:
    """Row-stochastic (dst, src) matrix of overlap fractions between output
    and source cells; applied as W @ img @ W.T it averages each source region
    with exact area weights, so the global mean is preserved."""
    W = np.zeros((dst, src))
    for i in range(dst):
        # output cell i covers [i*src, (i+1)*src) in units of 1/dst;
        # source cell s covers [s*dst, (s+1)*dst); overlaps are integers
        lo, hi = i * src, (i + 1) * src
        for s in range(lo // dst, min((hi + dst - 1) // dst, src)):
            ov = min(hi, (s + 1) * dst) - max(lo, s * dst)
            if ov > 0:
                W[i, s] = ov / src
    return W


def _check_square_image(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise DimensionError(f"expected a square 2-D image, got shape {img.shape}")
    return img


def downsample(img, target_side: int) -> np.ndarray:
    """Area-weighted box downsample of a square image to ``target_side``.

    Every output pixel is the exact average of its (possibly fractional)
    source region, so values stay in [0, 1] and the global mean is preserved.
    ``target_side`` equal to the input side returns an identical copy.
    """
    img = _check_square_image(img)
    side = img.shape[0]
    if not 1 <= target_side <= side:
        raise ValueError(f"target_side must be in [1, {side}], got {target_side}")
    W = _box_weights(side, target_side)
    out = W @ img @ W.T
    np.clip(out, 0.0, 1.0, out=out)
    return out


def _downsample_batch(images: np.ndarray, target_side: int) -> np.ndarray:
    W = _box_weights(images.shape[1], target_side)
    out = np.einsum("ij,njk,lk->nil", W, images, W, optimize=True)
    np.clip(out, 0.0, 1.0, out=out)
    return out


def build_pyramid(img, sides) -> list[np.ndarray]:
    """Renderings of ``img`` at each requested side, coarsest last.

    Sides must strictly decrease and start at or below the image side; every
    level is computed from the original image, not from the previous level.
    """
    img = _check_square_image(img)
    sides = [int(s) for s in sides]
    if not sides:
        raise ValueError("need at least one side")
    if any(a <= b for a, b in zip(sides, sides[1:])):
        raise ValueError(f"sides must strictly decrease, got {sides}")
    if sides[0] > img.shape[0]:
        raise ValueError(f"largest side {sides[0]} exceeds image side {img.shape[0]}")
    return [downsample(img, s) for s in sides]


def binarize(img, mode: str = "threshold", threshold: float = 0.5,
             rng=None) -> np.ndarray:
    """Flatten a grayscale image to a 0/1 float64 vector, row-major.

    ``threshold`` maps pixels strictly above the cut to 1; ``stochastic``
    treats each pixel as an independent Bernoulli probability and needs an
    rng (one draw per pixel, row-major order).
    """
    img = np.asarray(img, dtype=np.float64)
    if mode == "threshold":
        return (img > threshold).astype(np.float64).ravel()
    if mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic binarization needs an rng")
        return np.asarray(bernoulli(img.ravel(), rng), dtype=np.float64)
    raise ValueError(f"unknown binarize mode {mode!r}")


def _require_pyramid(arch: Architecture) -> list[int]:
    if not arch.is_pyramid_compatible():
        raise ArchitectureError(
            f"architecture {arch.sizes} is not pyramid-compatible: every layer "
            "below the top must be a perfect square with strictly decreasing sides"
        )
    return [isqrt(s) for s in arch.sizes[:-1]]


def stage_visible_sides(arch: Architecture) -> list[int]:
    """Side length of the visible rendering at each stage, in stage order
    (coarsest stage first, full resolution last)."""
    return list(reversed(_require_pyramid(arch)))


def _stage_data(images: np.ndarray, side: int, cfg: StageConfig, seed: int,
                stream_offset: int) -> np.ndarray:
    small = images if side == images.shape[1] else _downsample_batch(images, side)
    flat = small.reshape(small.shape[0], -1)
    if cfg.binarize_mode == "threshold":
        return (flat > cfg.threshold).astype(np.float64)
    rng = make_rng(seed, BINARIZE_STREAM_BASE + stream_offset)
    return bernoulli(flat, rng)


def pyramid_pretrain(arch: Architecture, images, cfg: StageConfig, seed: int,
                     on_stage=None) -> HelmholtzMachine:
    """Grow a machine stage by stage on coarse-to-fine renderings of
    ``images``.

    ``images`` is an (n, side, side) grayscale array in [0, 1] whose side
    squared equals the visible size.  Stage t (1-based) clamps layer L-t to
    its rendering and trains only the new bottom weight pair; the top bias
    trains in stage 1 only.  Each stage's rendering is computed from the
    original images.  ``on_stage(t, machine)`` is called after each stage for
    logging or inspection.  The returned machine has no frozen blocks.
    """
    sides = _require_pyramid(arch)
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise DimensionError(f"images must be (n, side, side), got {images.shape}")
    if images.shape[1] != sides[0]:
        raise DimensionError(
            f"image side {images.shape[1]} does not match visible side {sides[0]}"
        )
    if images.shape[0] == 0:
        raise ValueError("images is empty")

    if cfg.init == "zero":
        machine = HelmholtzMachine.zeros(arch)
    else:
        machine = HelmholtzMachine.random(
            arch, cfg.init_sigma, make_rng(seed, INIT_STREAM_ID)
        )

    L = arch.n_hidden
    for t in range(1, L + 1):
        level = L - t
        data = _stage_data(images, sides[level], cfg, seed, t)
        sub = machine.sub_stack(level)
        sub.frozen_R = [False] + [True] * (t - 1)
        sub.frozen_G = [False] + [True] * (t - 1)
        sub.frozen_top = t != 1
        train(sub, data,
              TrainConfig(cfg.stage_epochs, cfg.stage_learning_rate, seed, cfg.shuffle),
              stream_id=t)
        if on_stage is not None:
            on_stage(t, machine)

    if cfg.finetune_epochs > 0:
        lr = cfg.finetune_learning_rate
        data = _stage_data(images, sides[0], cfg, seed, L + 1)
        train(machine, data,
              TrainConfig(cfg.finetune_epochs,
                          cfg.stage_learning_rate if lr is None else lr,
                          seed, cfg.shuffle),
              stream_id=L + 1)
    return machine
