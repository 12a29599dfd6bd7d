"""Core value types, seeded randomness, and pixel-buffer arithmetic.

Every synthesis stage works with the types defined here.  All pixel data
is 32-bit float in [0, 1]; randomness flows through counter-based Philox
streams so that image i's content never depends on generation order or
worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_U64_MAX = 2**64


def _as_pixel_array(data, ndim: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{what} expects a {ndim}-D array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{what} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"{what} values must lie in [0, 1], got range [{lo}, {hi}]")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PriorImage:
    """A C x H x W image with float32 values in [0, 1].

    Immutable after construction (the backing array is write-locked), so
    instances are safe to share across threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_pixel_array(self.data, 3, "PriorImage")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SemanticMask:
    """A single-plane H x W scalar field with float32 values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_pixel_array(self.data, 2, "SemanticMask")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class MixWeights:
    """Raw per-scale coefficients and their softmax normalization.

    `normalized` is strictly positive and sums to 1 within 1e-6; both
    vectors have one entry per scale.
    """

    raw: np.ndarray
    normalized: np.ndarray

    def __post_init__(self):
        raw = np.array(self.raw, dtype=np.float64, copy=True)
        norm = np.array(self.normalized, dtype=np.float64, copy=True)
        if raw.ndim != 1 or norm.ndim != 1:
            raise ValueError("MixWeights vectors must be 1-D")
        if raw.shape != norm.shape:
            raise ValueError(
                f"raw and normalized lengths differ: {raw.shape[0]} vs {norm.shape[0]}"
            )
        if raw.size == 0:
            raise ValueError("MixWeights must be non-empty")
        if not (np.all(np.isfinite(raw)) and np.all(np.isfinite(norm))):
            raise ValueError("MixWeights contain non-finite values")
        if not np.all(norm > 0.0):
            raise ValueError("normalized weights must be strictly positive")
        total = float(norm.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"normalized weights must sum to 1 within 1e-6, got {total}")
        raw.flags.writeable = False
        norm.flags.writeable = False
        object.__setattr__(self, "raw", raw)
        object.__setattr__(self, "normalized", norm)

    def __len__(self) -> int:
        return self.raw.shape[0]


@dataclass
class RngStream:
    """One independent random stream, addressed by (master_seed, stream_index).

    Streams are single-owner: parallelism derives disjoint streams instead
    of sharing one.  Identical (master_seed, stream_index) always replays
    the identical draw sequence.
    """

    master_seed: int
    stream_index: int
    _gen: np.random.Generator = field(repr=False)

    # Draw helpers; every sampling site in the pipeline goes through these
    # so the draw contract lives in one place.

    def random(self, shape=None, dtype=np.float64) -> np.ndarray | float:
        """Uniform [0, 1) draws."""
        if shape is None:
            return float(self._gen.random())
        return self._gen.random(shape, dtype=dtype)

    def standard_normal(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def integer(self, low: int, high_exclusive: int) -> int:
        return int(self._gen.integers(low, high_exclusive))


def derive_stream(master_seed: int, stream_index: int) -> RngStream:
    """Derive the independent stream for (master_seed, stream_index).

    Pure function: repeated calls with the same arguments yield generators
    producing bit-identical sequences.  Distinct indices (or seeds) give
    statistically independent streams via Philox counter keying.
    """
    for name, value in (("master_seed", master_seed), ("stream_index", stream_index)):
        if not isinstance(value, (int, np.integer)):
            raise ValueError(f"{name} must be an integer, got {type(value).__name__}")
        if not 0 <= int(value) < _U64_MAX:
            raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
    bitgen = np.random.Philox(key=[int(master_seed), int(stream_index)])
    return RngStream(int(master_seed), int(stream_index), np.random.Generator(bitgen))


def softmax(raw) -> np.ndarray:
    """Numerically stabilized softmax over a 1-D coefficient vector.

    Output is strictly positive, sums to 1 within 1e-6, and is invariant
    to adding a constant to every input (max-subtraction).
    """
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("softmax expects a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input contains non-finite values")
    e = np.exp(v - v.max())
    return e / e.sum()


def _wrap_image(arr: np.ndarray) -> PriorImage:
    """Trusted constructor for pipeline stages whose output provably
    satisfies the invariants (fresh float32 buffer, clamped or convex).
    Skips the copy and validation; the format writers re-validate at the
    serialization boundary."""
    img = object.__new__(PriorImage)
    arr.flags.writeable = False
    object.__setattr__(img, "data", arr)
    return img


def _wrap_mask(arr: np.ndarray) -> SemanticMask:
    """Trusted SemanticMask constructor; see _wrap_image."""
    mask = object.__new__(SemanticMask)
    arr.flags.writeable = False
    object.__setattr__(mask, "data", arr)
    return mask


def clamp01(img):
    """Clamp pixel values into [0, 1]; in-range elements pass unchanged.

    Accepts a PriorImage or a raw float array (pipeline stages clamp raw
    buffers before wrapping them).  Non-finite input signals an upstream
    bug and raises RuntimeError rather than ValueError.
    """
    if isinstance(img, PriorImage):
        return PriorImage(np.clip(img.data, 0.0, 1.0))
    arr = np.asarray(img)
    if not np.all(np.isfinite(arr)):
        raise RuntimeError("clamp01 received non-finite values (upstream bug)")
    return np.clip(arr, 0.0, 1.0)
