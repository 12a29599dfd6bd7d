"""kNN-ball distribution metrics over embedding sets.

Given a "real" and a "fake" embedding set, each real point i carries a
ball of radius equal to the distance to its k-th nearest neighbor within
the real set (excluding itself); fake points carry the symmetric radii.
Membership uses closed balls, so exact duplicates count as covered.

  precision  fraction of fake points inside at least one real ball
  recall     fraction of real points inside at least one fake ball
  density    mean number of real balls containing each fake point, / k
  coverage   fraction of real balls containing at least one fake point

All pairwise work is brute force and exact (float64 squared distances);
no spatial index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import read_dipe, write_dipe

# Rows per block when streaming pairwise distances; bounds peak memory at
# roughly block * N * 8 bytes.
_BLOCK_ROWS = 2048

DEFAULT_K = 5


@dataclass(frozen=True)
class EmbeddingSet:
    """An N x E matrix of finite float32 feature vectors."""

    rows: np.ndarray

    def __post_init__(self):
        arr = np.array(self.rows, dtype=np.float32, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"EmbeddingSet expects a non-empty 2-D matrix, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("EmbeddingSet entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "rows", arr)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    density: float
    coverage: float
    k: int
    n_real: int
    n_fake: int

    def __post_init__(self):
        for name in ("precision", "recall", "coverage"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.density < 0.0:
            raise ValueError(f"density must be >= 0, got {self.density}")

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "density": self.density,
            "coverage": self.coverage,
            "k": self.k,
            "n_real": self.n_real,
            "n_fake": self.n_fake,
        }


def _sq_dists(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (len(queries), len(points)), float64."""
    q2 = np.einsum("ij,ij->i", queries, queries)[:, None]
    p2 = np.einsum("ij,ij->i", points, points)[None, :]
    d2 = q2 + p2 - 2.0 * (queries @ points.T)
    return np.maximum(d2, 0.0)


def _knn_sq_radii(rows: np.ndarray, k: int) -> np.ndarray:
    n = rows.shape[0]
    radii = np.empty(n, dtype=np.float64)
    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        d2 = _sq_dists(rows[start:stop], rows)
        cols = np.arange(start, stop)
        d2[np.arange(stop - start), cols] = np.inf  # exclude self
        radii[start:stop] = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return radii


def knn_radius(embeddings: EmbeddingSet, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest neighbor in the set."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if embeddings.count < k + 1:
        raise ValueError(
            f"need at least k+1 = {k + 1} points for k = {k}, got {embeddings.count}"
        )
    rows = embeddings.rows.astype(np.float64)
    return np.sqrt(_knn_sq_radii(rows, k))


def compute_metrics(real: EmbeddingSet, fake: EmbeddingSet, k: int = DEFAULT_K) -> MetricsReport:
    """Precision, recall, density, coverage of fake against real."""
    if real.dim != fake.dim:
        raise ValueError(f"embedding dims differ: real {real.dim} vs fake {fake.dim}")
    if k < 1:
        raise ValueError("k must be >= 1")
    for name, s in (("real", real), ("fake", fake)):
        if s.count < k + 1:
            raise ValueError(f"{name} set needs at least k+1 = {k + 1} points, got {s.count}")

    real_rows = real.rows.astype(np.float64)
    fake_rows = fake.rows.astype(np.float64)
    real_r2 = _knn_sq_radii(real_rows, k)
    fake_r2 = _knn_sq_radii(fake_rows, k)

    # Pass over fake points against real balls: precision, density, coverage.
    fake_in_some_real_ball = 0
    memberships_total = 0
    real_ball_hit = np.zeros(real.count, dtype=bool)
    for start in range(0, fake.count, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, fake.count)
        inside = _sq_dists(fake_rows[start:stop], real_rows) <= real_r2[None, :]
        fake_in_some_real_ball += int(inside.any(axis=1).sum())
        memberships_total += int(inside.sum())
        real_ball_hit |= inside.any(axis=0)

    # Pass over real points against fake balls: recall.
    real_in_some_fake_ball = 0
    for start in range(0, real.count, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, real.count)
        inside = _sq_dists(real_rows[start:stop], fake_rows) <= fake_r2[None, :]
        real_in_some_fake_ball += int(inside.any(axis=1).sum())

    return MetricsReport(
        precision=fake_in_some_real_ball / fake.count,
        recall=real_in_some_fake_ball / real.count,
        density=memberships_total / (k * fake.count),
        coverage=float(real_ball_hit.sum()) / real.count,
        k=k,
        n_real=real.count,
        n_fake=fake.count,
    )


def load_embeddings(path) -> EmbeddingSet:
    """Read an embedding file (DIPE format)."""
    return EmbeddingSet(read_dipe(path))


def save_embeddings(path, embeddings: EmbeddingSet) -> None:
    write_dipe(path, embeddings.rows)
