"""Wire-format I/O for the training harness.

Implements the published byte layouts directly so the harness depends on
the synthesis engine only through its files:

  DIPF shard: "DIPF", u32 version=1, u32 C, u32 H, u32 W, u64 count,
  then count * C*H*W little-endian float32 in CHW order, values in [0,1].

  DIPE embeddings: "DIPE", u32 version=1, u64 count, u32 dim, then
  count rows of dim little-endian float32.

Dataset manifests are JSON with a "shards" list of
{kind, path, start, count, sha256} entries.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

DIPF_HEADER = struct.Struct("<4sIIIIQ")
DIPE_HEADER = struct.Struct("<4sIQI")


def read_dipf(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < DIPF_HEADER.size:
        raise ValueError(f"{path}: truncated DIPF header")
    magic, version, c, h, w, n = DIPF_HEADER.unpack_from(raw)
    if magic != b"DIPF" or version != 1:
        raise ValueError(f"{path}: not a DIPF v1 file")
    payload = raw[DIPF_HEADER.size :]
    expected = n * c * h * w * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, c, h, w).astype(np.float32)


def write_dipf(path, images: np.ndarray) -> None:
    arr = np.ascontiguousarray(images, dtype="<f4")
    if arr.ndim != 4:
        raise ValueError("DIPF expects an (N, C, H, W) batch")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("DIPF values must be finite and in [0, 1]")
    n, c, h, w = arr.shape
    with open(path, "wb") as f:
        f.write(DIPF_HEADER.pack(b"DIPF", 1, c, h, w, n))
        f.write(arr.tobytes())


def write_dipe(path, rows: np.ndarray) -> None:
    arr = np.ascontiguousarray(rows, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("DIPE expects an (N, E) matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("DIPE values must be finite")
    n, dim = arr.shape
    with open(path, "wb") as f:
        f.write(DIPE_HEADER.pack(b"DIPE", 1, n, dim))
        f.write(arr.tobytes())


def read_dipe(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < DIPE_HEADER.size:
        raise ValueError(f"{path}: truncated DIPE header")
    magic, version, n, dim = DIPE_HEADER.unpack_from(raw)
    if magic != b"DIPE" or version != 1:
        raise ValueError(f"{path}: not a DIPE v1 file")
    payload = raw[DIPE_HEADER.size :]
    if len(payload) != n * dim * 4:
        raise ValueError(f"{path}: expected {n * dim * 4} payload bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float32)


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def load_prior_dataset(manifest_path) -> np.ndarray:
    """Load every shard of a DIPF dataset into one (N, C, H, W) array."""
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path)
    parts = []
    for shard in manifest["shards"]:
        if shard["kind"] != "f32bin":
            raise ValueError(f"cannot train on shard kind {shard['kind']!r}; use f32bin datasets")
        parts.append(read_dipf(manifest_path.parent / shard["path"]))
    images = np.concatenate(parts, axis=0)
    if images.shape[0] != manifest["total_count"]:
        raise ValueError(
            f"manifest promises {manifest['total_count']} images, shards hold {images.shape[0]}"
        )
    return images
