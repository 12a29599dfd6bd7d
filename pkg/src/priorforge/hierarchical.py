"""Multiscale uniform noise sampling and convex mixing.

Noise images are drawn at dyadic side lengths 2^0 .. 2^d_max, upscaled to
the largest scale, and mixed with softmax weights into one image whose
structure spans local to global correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MixWeights, PriorImage, RngStream, _wrap_image, softmax

UPSCALE_MODES = ("nearest", "bilinear")


def compute_dmax(height: int, width: int) -> int:
    """Smallest d with 2^d >= max(height, width)."""
    if height < 1 or width < 1:
        raise ValueError(f"dimensions must be >= 1, got {height}x{width}")
    target = max(height, width)
    d, side = 0, 1
    while side < target:
        side *= 2
        d += 1
    return d


@dataclass(frozen=True)
class ScalePlan:
    """The dyadic scale set covering a target H x W."""

    d_max: int
    scales: tuple[int, ...]
    upscale_mode: str = "nearest"

    def __post_init__(self):
        if self.upscale_mode not in UPSCALE_MODES:
            raise ValueError(f"upscale_mode must be one of {UPSCALE_MODES}")
        expected = tuple(1 << d for d in range(self.d_max + 1))
        if self.scales != expected:
            raise ValueError(f"scales must double from 1 to 2^d_max, got {self.scales}")

    @classmethod
    def for_target(cls, height: int, width: int, upscale_mode: str = "nearest") -> "ScalePlan":
        d_max = compute_dmax(height, width)
        return cls(d_max, tuple(1 << d for d in range(d_max + 1)), upscale_mode)


def sample_scale_noise(rng: RngStream, channels: int, d: int) -> PriorImage:
    """Draw a C x 2^d x 2^d image of i.i.d. uniform [0, 1) noise."""
    if channels < 1:
        raise ValueError(f"channels must be >= 1, got {channels}")
    if d < 0:
        raise ValueError(f"scale exponent must be >= 0, got {d}")
    side = 1 << d
    return _wrap_image(rng.random((channels, side, side), dtype=np.float32))


def _upscale_nearest(data: np.ndarray, target: int) -> np.ndarray:
    side = data.shape[1]
    if target % side == 0:
        f = target // side
        return np.repeat(np.repeat(data, f, axis=1), f, axis=2)
    idx = (np.arange(target, dtype=np.int64) * side) // target
    return data[:, idx][:, :, idx]


def _upscale_bilinear(data: np.ndarray, target: int) -> np.ndarray:
    # Half-pixel (corner-aligned-off) convention with edge clamping,
    # applied separably along rows then columns.
    side = data.shape[1]
    coords = (np.arange(target, dtype=np.float64) + 0.5) * (side / target) - 0.5
    coords = np.clip(coords, 0.0, side - 1)
    i0 = np.floor(coords).astype(np.int64)
    i1 = np.minimum(i0 + 1, side - 1)
    frac = (coords - i0).astype(np.float32)
    rows = data[:, i0, :] * (1 - frac)[None, :, None] + data[:, i1, :] * frac[None, :, None]
    out = rows[:, :, i0] * (1 - frac)[None, None, :] + rows[:, :, i1] * frac[None, None, :]
    return np.clip(out, 0.0, 1.0)


def upscale(img: PriorImage, target_side: int, mode: str = "nearest") -> PriorImage:
    """Upscale a square image to target_side x target_side.

    nearest replicates source blocks exactly; bilinear interpolates with
    the half-pixel convention.  Output stays within [0, 1].
    """
    if img.height != img.width:
        raise ValueError(f"upscale requires a square image, got {img.height}x{img.width}")
    if target_side < img.height:
        raise ValueError(f"target {target_side} smaller than source side {img.height}")
    if mode not in UPSCALE_MODES:
        raise ValueError(f"upscale mode must be one of {UPSCALE_MODES}")
    if target_side == img.height:
        return img
    if mode == "nearest":
        return _wrap_image(_upscale_nearest(img.data, target_side))
    return _wrap_image(_upscale_bilinear(img.data, target_side))


def mix_planes(planes: list[PriorImage], weights: MixWeights) -> PriorImage:
    """Convex combination of same-shape images (test hook for forced weights)."""
    if len(planes) != len(weights):
        raise ValueError(f"{len(planes)} planes but {len(weights)} weights")
    shape = planes[0].shape
    if any(p.shape != shape for p in planes):
        raise ValueError("all planes must share one shape")
    acc = np.zeros(shape, dtype=np.float64)
    for w, plane in zip(weights.normalized, planes):
        acc += w * plane.data.astype(np.float64)
    # float64 accumulation keeps the result inside the elementwise
    # [min, max] envelope after the final float32 rounding
    return _wrap_image(np.clip(acc, 0.0, 1.0).astype(np.float32))


def mix_hierarchical(rng: RngStream, channels: int, plan: ScalePlan) -> tuple[PriorImage, MixWeights]:
    """Sample per-scale noise and mix into one 2^d_max square image.

    Draw order is part of the reproducibility contract: noise planes in
    ascending d, then the coefficient vector (standard normal, softmaxed).
    """
    planes = [
        upscale(sample_scale_noise(rng, channels, d), 1 << plan.d_max, plan.upscale_mode)
        for d in range(plan.d_max + 1)
    ]
    raw = rng.standard_normal(plan.d_max + 1)
    weights = MixWeights(raw, softmax(raw))
    return mix_planes(planes, weights), weights
