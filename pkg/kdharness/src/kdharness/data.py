"""Dataset loading: prior shards, uniform-noise baselines, and real data.

Real data comes from MNIST IDX files when a directory is supplied (flag,
config key, or KDHARNESS_MNIST_DIR), or from the bundled scikit-learn
digits set as an always-available desk-scale stand-in (8x8 scans resized
to 28x28).
"""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .io import load_prior_dataset

MNIST_DIR_ENV = "KDHARNESS_MNIST_DIR"

_MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


@dataclass
class LabeledData:
    """Images (N, C, H, W) float32 in [0, 1] with integer labels (N,)."""

    images: torch.Tensor
    labels: torch.Tensor
    num_classes: int

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("image/label counts differ")

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_idx(path: Path) -> np.ndarray:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        raw = f.read()
    zeros, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zeros != 0 or dtype_code != 0x08:
        raise ValueError(f"{path}: not an unsigned-byte IDX file")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    return data.reshape(dims)


def _find_idx(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"{directory} does not contain {stem}[.gz]")


def mnist_available(directory: str | None = None) -> bool:
    root = directory or os.environ.get(MNIST_DIR_ENV)
    if not root:
        return False
    try:
        for stem in _MNIST_FILES.values():
            _find_idx(Path(root), stem)
    except FileNotFoundError:
        return False
    return True


def load_mnist(directory: str | None = None) -> tuple[LabeledData, LabeledData]:
    """Load MNIST train/test from IDX files in a directory."""
    root = directory or os.environ.get(MNIST_DIR_ENV)
    if not root:
        raise FileNotFoundError(
            f"no MNIST directory given; pass one or set {MNIST_DIR_ENV}"
        )
    root = Path(root)

    def split(images_stem, labels_stem):
        images = _read_idx(_find_idx(root, images_stem)).astype(np.float32) / 255.0
        labels = _read_idx(_find_idx(root, labels_stem)).astype(np.int64)
        tensor = torch.from_numpy(images).unsqueeze(1)
        return LabeledData(tensor, torch.from_numpy(labels), 10)

    return (
        split(_MNIST_FILES["train_images"], _MNIST_FILES["train_labels"]),
        split(_MNIST_FILES["test_images"], _MNIST_FILES["test_labels"]),
    )


def load_digits28(seed: int = 0, test_fraction: float = 0.165) -> tuple[LabeledData, LabeledData]:
    """Bundled scikit-learn digits resized to 1x28x28, split train/test."""
    from sklearn.datasets import load_digits

    bunch = load_digits()
    images = torch.from_numpy(bunch.images.astype(np.float32) / 16.0).unsqueeze(1)
    images = torch.nn.functional.interpolate(
        images, size=(28, 28), mode="bilinear", align_corners=False
    ).clamp(0.0, 1.0)
    labels = torch.from_numpy(bunch.target.astype(np.int64))

    order = torch.randperm(len(labels), generator=torch.Generator().manual_seed(seed))
    n_test = int(round(len(labels) * test_fraction))
    test_idx, train_idx = order[:n_test], order[n_test:]
    return (
        LabeledData(images[train_idx], labels[train_idx], 10),
        LabeledData(images[test_idx], labels[test_idx], 10),
    )


def load_real_dataset(name: str, directory: str | None = None, seed: int = 0):
    if name == "mnist":
        return load_mnist(directory)
    if name == "digits":
        return load_digits28(seed)
    raise ValueError(f"unknown real dataset {name!r}; choose mnist or digits")


def load_priors(manifest_path) -> torch.Tensor:
    """Prior images from a DIPF dataset as an (N, C, H, W) float32 tensor."""
    return torch.from_numpy(load_prior_dataset(manifest_path))


def make_noise_images(count: int, channels: int, height: int, width: int, seed: int) -> torch.Tensor:
    """Uniform [0, 1) noise images for the naive baseline, seed-determined."""
    gen = torch.Generator().manual_seed(seed)
    return torch.rand((count, channels, height, width), generator=gen)
