"""Semantic mask refinement and pairwise image blending.

A uniform-noise mask is iterated through blur plus a diverging filter
until it settles into near-binary regions with smooth boundaries, then
used to blend image pairs drawn from transformed noise or monochromatic
sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np
from scipy.ndimage import correlate1d

from .core import PriorImage, RngStream, SemanticMask, _wrap_image, _wrap_mask


@dataclass(frozen=True)
class MaskRefineConfig:
    """Blur parameters and stopping rule for mask refinement."""

    epsilon: float = 1e-2
    max_iters: int = 50
    blur_sigma: float = 1.5
    blur_kernel: int = 5

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be > 0")
        if self.blur_kernel < 3 or self.blur_kernel % 2 == 0:
            raise ValueError("blur_kernel must be odd and >= 3")

    @classmethod
    def for_size(cls, height: int, width: int, epsilon: float = 1e-2, max_iters: int = 50) -> "MaskRefineConfig":
        """Defaults calibrated at side 32, sigma and kernel scaled with size."""
        scale = max(height, width) / 32.0
        kernel = int(round(5 * scale))
        if kernel % 2 == 0:
            kernel += 1
        return cls(epsilon, max_iters, 1.5 * scale, max(kernel, 3))


@dataclass(frozen=True)
class MonochromeSource:
    """A single flat color, one value per channel in [0, 1]."""

    channels: int
    color: tuple[float, ...]

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        color = tuple(float(c) for c in self.color)
        if len(color) != self.channels:
            raise ValueError(f"expected {self.channels} color values, got {len(color)}")
        if any(not (0.0 <= c <= 1.0) or not np.isfinite(c) for c in color):
            raise ValueError("color values must lie in [0, 1]")
        object.__setattr__(self, "color", color)

    def render(self, height: int, width: int) -> PriorImage:
        arr = np.empty((self.channels, height, width), dtype=np.float32)
        arr[:] = np.asarray(self.color, dtype=np.float32)[:, None, None]
        return _wrap_image(arr)


def diverging_map(values: np.ndarray) -> np.ndarray:
    """Element-wise piecewise quadratic pushing values toward 0 or 1.

    2*m^2 below 0.5 and 1 - 2*(m-1)^2 from 0.5 up: fixed points exactly
    {0, 0.5, 1}, continuously differentiable at 0.5 (both slopes 2).
    Dtype-preserving; operates on raw arrays.
    """
    m = np.asarray(values)
    return np.where(m < 0.5, 2.0 * m * m, 1.0 - 2.0 * (m - 1.0) * (m - 1.0))


def diverging_filter(mask: SemanticMask) -> SemanticMask:
    """Apply the diverging map to a mask."""
    return SemanticMask(diverging_map(mask.data))


@lru_cache(maxsize=64)
def _gaussian_kernel1d(sigma: float, size: int) -> np.ndarray:
    radius = size // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    k /= k.sum()
    k.flags.writeable = False
    return k


def _blur_array(data: np.ndarray, sigma: float, size: int) -> np.ndarray:
    kernel = _gaussian_kernel1d(sigma, size)
    out = correlate1d(data, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def blur(mask: SemanticMask, cfg: MaskRefineConfig) -> SemanticMask:
    """Gaussian blur with the configured kernel, reflection padded.

    The kernel sums to 1, so constant masks are exact fixed points and
    interior mass is conserved.
    """
    return _wrap_mask(_blur_array(mask.data, cfg.blur_sigma, cfg.blur_kernel))


def refine_from(initial: SemanticMask, cfg: MaskRefineConfig) -> tuple[SemanticMask, int]:
    """Iterate divergence-after-blur from a given mask (test hook).

    Stops at the first iteration whose mean absolute pixel update falls
    below epsilon, or after max_iters.  Returns the mask and the number of
    iterations performed; hitting the cap is reported, not raised.
    """
    m = initial.data
    iterations = cfg.max_iters
    for i in range(1, cfg.max_iters + 1):
        nxt = diverging_map(_blur_array(m, cfg.blur_sigma, cfg.blur_kernel)).astype(np.float32)
        delta = float(np.abs(nxt - m).mean())
        m = nxt
        if delta < cfg.epsilon:
            iterations = i
            break
    return _wrap_mask(m), iterations


def refine_mask(rng: RngStream, height: int, width: int, cfg: MaskRefineConfig) -> tuple[SemanticMask, int]:
    """Refine a fresh uniform-noise mask into near-binary regions."""
    m0 = _wrap_mask(rng.random((height, width), dtype=np.float32))
    return refine_from(m0, cfg)


def cutmix(a: PriorImage, b: PriorImage, mask: SemanticMask) -> PriorImage:
    """Blend two images through a mask: mask*a + (1-mask)*b per pixel.

    The mask plane broadcasts over channels.  Output lies elementwise
    between min(a, b) and max(a, b).
    """
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if (a.height, a.width) != (mask.height, mask.width):
        raise ValueError(
            f"mask {mask.height}x{mask.width} does not match images {a.height}x{a.width}"
        )
    m = mask.data.astype(np.float64)[None, :, :]
    blended = m * a.data.astype(np.float64) + (1.0 - m) * b.data.astype(np.float64)
    return _wrap_image(blended.astype(np.float32))


class ImageSource(Protocol):
    """Source of fresh images with a fixed output shape."""

    channels: int
    height: int
    width: int

    def __call__(self) -> PriorImage: ...


def sample_pair(rng: RngStream, source: ImageSource, mono_prob: float) -> tuple[PriorImage, PriorImage]:
    """Draw the two blend partners.

    Each slot independently becomes a fresh monochromatic image with
    probability mono_prob, otherwise a fresh image from the source.  Per
    slot the decision draw comes first, then either the per-channel color
    or the source's own draws.
    """
    if not 0.0 <= mono_prob <= 1.0:
        raise ValueError(f"mono_prob must lie in [0, 1], got {mono_prob}")
    pair = []
    for _ in range(2):
        if rng.random() < mono_prob:
            color = rng.random(source.channels, dtype=np.float64)
            mono = MonochromeSource(source.channels, tuple(float(c) for c in color))
            pair.append(mono.render(source.height, source.width))
        else:
            pair.append(source())
    return pair[0], pair[1]
