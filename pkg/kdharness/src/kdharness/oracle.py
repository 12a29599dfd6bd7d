"""The black-box teacher interface.

The oracle is the harness's only doorway to the teacher: one method that
maps an image batch to top-1 class indices.  Logits, probabilities,
gradients, and parameters are sealed off by construction (the wrapped
network lives in a closure, not an attribute), so no training code can
reach them even by accident.
"""

from __future__ import annotations

import torch
from torch import nn


class TeacherOracle:
    __slots__ = ("query_count", "_predict")

    def __init__(self, model: nn.Module):
        import copy

        frozen = copy.deepcopy(model).eval()
        for p in frozen.parameters():
            p.requires_grad_(False)

        def predict(batch: torch.Tensor) -> torch.Tensor:
            with torch.no_grad():
                return frozen(batch).argmax(dim=1)

        self.query_count = 0
        self._predict = predict

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        """Top-1 class index in [0, K) for each image in the batch.

        Deterministic for a fixed teacher; each call advances query_count
        by the batch size.
        """
        if batch.ndim != 4:
            raise ValueError(f"expected an (N, C, H, W) batch, got shape {tuple(batch.shape)}")
        labels = self._predict(batch)
        self.query_count += int(batch.shape[0])
        return labels


def query_in_batches(oracle: TeacherOracle, images: torch.Tensor, batch_size: int = 512) -> torch.Tensor:
    """Label a whole tensor of images through the oracle, batch by batch."""
    chunks = [
        oracle.query(images[start : start + batch_size])
        for start in range(0, images.shape[0], batch_size)
    ]
    return torch.cat(chunks)
