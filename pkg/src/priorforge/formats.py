"""Binary wire formats and manifest I/O.

DIPF shard: magic "DIPF", u32 version=1, u32 C, u32 H, u32 W,
u64 image_count, then image_count * C*H*W little-endian float32 values in
CHW order, each in [0, 1].

DIPE embeddings: magic "DIPE", u32 version=1, u64 count, u32 dim, then
count rows of dim little-endian float32 values.

Manifests are UTF-8 JSON.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

DIPF_MAGIC = b"DIPF"
DIPE_MAGIC = b"DIPE"
DIPF_VERSION = 1
DIPE_VERSION = 1

_DIPF_HEADER = struct.Struct("<4sIIIIQ")
_DIPE_HEADER = struct.Struct("<4sIQI")


class FormatError(ValueError):
    """A file does not conform to its declared wire format."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_dipf(path, images: np.ndarray) -> None:
    """Write an (N, C, H, W) float32 batch as one shard file."""
    arr = np.ascontiguousarray(images, dtype="<f4")
    if arr.ndim != 4:
        raise ValueError(f"expected a 4-D (N, C, H, W) batch, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("shard values must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("shard values must lie in [0, 1]")
    n, c, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(_DIPF_HEADER.pack(DIPF_MAGIC, DIPF_VERSION, c, h, w, n))
        f.write(arr.tobytes())


def read_dipf_header(path) -> tuple[int, int, int, int]:
    """Parse a shard header, returning (C, H, W, count)."""
    with open(path, "rb") as f:
        raw = f.read(_DIPF_HEADER.size)
    if len(raw) < _DIPF_HEADER.size:
        raise FormatError(f"{path}: truncated header, {len(raw)} of {_DIPF_HEADER.size} bytes")
    magic, version, c, h, w, n = _DIPF_HEADER.unpack(raw)
    if magic != DIPF_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0")
    if version != DIPF_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte offset 4")
    return c, h, w, n


def read_dipf(path) -> np.ndarray:
    """Read a full shard into an (N, C, H, W) float32 array."""
    c, h, w, n = read_dipf_header(path)
    expected = n * c * h * w * 4
    with open(path, "rb") as f:
        f.seek(_DIPF_HEADER.size)
        payload = f.read()
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload length {len(payload)} bytes, expected {expected} "
            f"({n} images of {c}x{h}x{w})"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(n, c, h, w).astype(np.float32)


def read_dipf_images(path, indices) -> np.ndarray:
    """Read selected images from a shard by offset, without loading it all."""
    import os

    c, h, w, n = read_dipf_header(path)
    image_bytes = c * h * w * 4
    expected = _DIPF_HEADER.size + n * image_bytes
    actual = os.path.getsize(path)
    if actual != expected:
        raise FormatError(
            f"{path}: file length {actual} bytes, expected {expected} "
            f"({n} images of {c}x{h}x{w})"
        )
    out = np.empty((len(indices), c, h, w), dtype=np.float32)
    with open(path, "rb") as f:
        for row, index in enumerate(indices):
            index = int(index)
            if not 0 <= index < n:
                raise ValueError(f"image index {index} outside [0, {n})")
            f.seek(_DIPF_HEADER.size + index * image_bytes)
            payload = f.read(image_bytes)
            if len(payload) != image_bytes:
                raise FormatError(f"{path}: short read at image {index}")
            out[row] = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    return out


def write_dipe(path, rows: np.ndarray) -> None:
    """Write an (N, E) float32 embedding matrix."""
    arr = np.ascontiguousarray(rows, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D (N, E) matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedding values must be finite")
    n, dim = arr.shape
    with open(path, "wb") as f:
        f.write(_DIPE_HEADER.pack(DIPE_MAGIC, DIPE_VERSION, n, dim))
        f.write(arr.tobytes())


def read_dipe(path) -> np.ndarray:
    """Read an embedding matrix, rejecting non-finite entries."""
    with open(path, "rb") as f:
        raw = f.read(_DIPE_HEADER.size)
        if len(raw) < _DIPE_HEADER.size:
            raise FormatError(f"{path}: truncated header, {len(raw)} of {_DIPE_HEADER.size} bytes")
        magic, version, n, dim = _DIPE_HEADER.unpack(raw)
        if magic != DIPE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at byte offset 0")
        if version != DIPE_VERSION:
            raise FormatError(f"{path}: unsupported version {version} at byte offset 4")
        payload = f.read()
    expected = n * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload length {len(payload)} bytes, expected {expected} ({n} rows of {dim})"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float32)
    finite = np.isfinite(arr)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise FormatError(f"{path}: non-finite value at row {row}, col {col}")
    return arr


def write_manifest(path, manifest: dict) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid manifest JSON: {e}") from e
