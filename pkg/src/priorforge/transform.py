"""Random rotation, elastic deformation, and cropping.

The three stages compose in a fixed order (rotate, then elastic, then
crop).  Both warps resample bilinearly with symmetric reflection padding,
so no constant-color borders leak into the statistics downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import PriorImage, RngStream, _wrap_image

ROTATION_LIMIT_DEG = 45.0

# Defaults calibrated at side 32, scaled linearly with the actual side.
ELASTIC_ALPHA_BASE = 8.0
ELASTIC_SIGMA_BASE = 4.0
ELASTIC_REFERENCE_SIDE = 32


@dataclass(frozen=True)
class TransformParams:
    """Parameters of one rotate/elastic/crop application."""

    rotation_deg: float
    elastic_alpha: float
    elastic_sigma: float
    crop_top: int
    crop_left: int
    out_h: int
    out_w: int

    def __post_init__(self):
        if not -ROTATION_LIMIT_DEG <= self.rotation_deg <= ROTATION_LIMIT_DEG:
            raise ValueError(f"rotation_deg must be within +/-{ROTATION_LIMIT_DEG}")
        if self.elastic_alpha < 0:
            raise ValueError("elastic_alpha must be >= 0")
        if self.elastic_sigma <= 0:
            raise ValueError("elastic_sigma must be > 0")
        if self.crop_top < 0 or self.crop_left < 0 or self.out_h < 1 or self.out_w < 1:
            raise ValueError("crop window fields must be non-negative with positive size")


@lru_cache(maxsize=64)
def _pixel_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    jj, ii = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    ii.flags.writeable = False
    jj.flags.writeable = False
    return ii, jj


def _reflect_indices(idx: np.ndarray, n: int) -> np.ndarray:
    # Symmetric reflection (edge repeated): -1 -> 0, n -> n-1, period 2n.
    if n == 1:
        return np.zeros_like(idx)
    idx = np.mod(idx, 2 * n)
    return np.where(idx >= n, 2 * n - 1 - idx, idx)


def _bilinear_sample(chw: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample every channel at fractional (ys, xs), reflecting out-of-frame."""
    _, h, w = chw.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    wy = (ys - y0).astype(np.float32)
    wx = (xs - x0).astype(np.float32)
    y0r, y1r = _reflect_indices(y0, h), _reflect_indices(y0 + 1, h)
    x0r, x1r = _reflect_indices(x0, w), _reflect_indices(x0 + 1, w)
    v00 = chw[:, y0r, x0r]
    v01 = chw[:, y0r, x1r]
    v10 = chw[:, y1r, x0r]
    v11 = chw[:, y1r, x1r]
    top = v00 + wx * (v01 - v00)
    bottom = v10 + wx * (v11 - v10)
    return top + wy * (bottom - top)


def rotate(img: PriorImage, angle_deg: float) -> PriorImage:
    """Rotate about the image center, bilinear, reflection padded."""
    if not -ROTATION_LIMIT_DEG <= angle_deg <= ROTATION_LIMIT_DEG:
        raise ValueError(f"angle {angle_deg} outside [-45, 45]")
    h, w = img.height, img.width
    yc, xc = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = _pixel_grid(h, w)
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    ys = cos * (ii - yc) - sin * (jj - xc) + yc
    xs = sin * (ii - yc) + cos * (jj - xc) + xc
    return _wrap_image(np.clip(_bilinear_sample(img.data, ys, xs), 0.0, 1.0))


def elastic(img: PriorImage, rng: RngStream, alpha: float, sigma: float) -> PriorImage:
    """Warp by a smoothed random displacement field.

    dx then dy are drawn i.i.d. uniform [-1, 1] per pixel, Gaussian
    smoothed with radius sigma, scaled by alpha pixels.  alpha = 0 is the
    exact identity (fields are still drawn, keeping the stream layout
    independent of parameter values).
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    h, w = img.height, img.width
    dx = rng.random((h, w), dtype=np.float32) * 2.0 - 1.0
    dy = rng.random((h, w), dtype=np.float32) * 2.0 - 1.0
    dx = gaussian_filter(dx, sigma, mode="reflect") * alpha
    dy = gaussian_filter(dy, sigma, mode="reflect") * alpha
    ii, jj = _pixel_grid(h, w)
    out = _bilinear_sample(img.data, ii + dy, jj + dx)
    return _wrap_image(np.clip(out, 0.0, 1.0))


def crop(img: PriorImage, top: int, left: int, out_h: int, out_w: int) -> PriorImage:
    """Exact sub-window copy."""
    if top < 0 or left < 0 or out_h < 1 or out_w < 1:
        raise ValueError("crop window must be non-negative with positive size")
    if top + out_h > img.height or left + out_w > img.width:
        raise ValueError(
            f"crop window [{top}:{top + out_h}, {left}:{left + out_w}] "
            f"exceeds image {img.height}x{img.width}"
        )
    return _wrap_image(img.data[:, top : top + out_h, left : left + out_w].copy())


def default_elastic_params(side: int) -> tuple[float, float]:
    """Elastic (alpha, sigma) scaled linearly from the side-32 defaults."""
    scale = side / ELASTIC_REFERENCE_SIDE
    return ELASTIC_ALPHA_BASE * scale, ELASTIC_SIGMA_BASE * scale


def draw_crop_offsets(rng: RngStream, side: int, out_h: int, out_w: int) -> tuple[int, int]:
    """Uniform (top, left) over all valid crop positions; top drawn first."""
    top = rng.integer(0, side - out_h + 1)
    left = rng.integer(0, side - out_w + 1)
    return top, left


def apply_transform(img: PriorImage, rng: RngStream, params: TransformParams) -> PriorImage:
    """Apply rotate -> elastic -> crop with explicit parameters."""
    out = rotate(img, params.rotation_deg)
    out = elastic(out, rng, params.elastic_alpha, params.elastic_sigma)
    return crop(out, params.crop_top, params.crop_left, params.out_h, params.out_w)


def apply_nonlinear(
    img: PriorImage,
    rng: RngStream,
    out_h: int,
    out_w: int,
    elastic_alpha: float | None = None,
    elastic_sigma: float | None = None,
) -> PriorImage:
    """Random rotate -> elastic -> crop down to out_h x out_w.

    The angle is uniform over [-45, 45] and the crop offset uniform over
    all valid positions.  Draws interleave with the stages in their fixed
    order: angle, elastic fields, crop offsets.
    """
    if img.height != img.width:
        raise ValueError("apply_nonlinear expects a square source image")
    side = img.height
    if side < max(out_h, out_w):
        raise ValueError(f"source side {side} smaller than output {out_h}x{out_w}")
    alpha_def, sigma_def = default_elastic_params(side)
    alpha = alpha_def if elastic_alpha is None else elastic_alpha
    sigma = sigma_def if elastic_sigma is None else elastic_sigma

    angle = rng.uniform(-ROTATION_LIMIT_DEG, ROTATION_LIMIT_DEG)
    out = rotate(img, angle)
    out = elastic(out, rng, alpha, sigma)
    top, left = draw_crop_offsets(rng, side, out_h, out_w)
    return crop(out, top, left, out_h, out_w)
