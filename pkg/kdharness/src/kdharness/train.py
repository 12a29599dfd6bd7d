"""Teacher pre-training, hard-label primer training, and distillation.

The primer student learns from teacher hard labels alone (cross-entropy
against the oracle's top-1 output).  The final student adds a soft term:
an L1 match between its logits and the frozen primer's logits, summed
over classes, so the total objective is CE + L1 with both terms logged
separately.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .data import LabeledData
from .io import write_dipe
from .models import build_model
from .oracle import TeacherOracle, query_in_batches

MODES = ("naive_noise", "hard_only", "full")


@dataclass(frozen=True)
class TrainRunConfig:
    """One training run, recorded verbatim into its report."""

    dataset_manifest: str
    teacher_checkpoint: str
    mode: str = "full"
    arch: str = "lenet5"
    num_classes: int = 10
    epochs: int = 30
    batch_size: int = 128
    lr: float = 1e-3
    schedule: str = "cosine"  # cosine | constant
    seed: int = 0
    l1_weight: float = 1.0
    warm_start: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError("schedule must be cosine or constant")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRunConfig":
        return cls(**d)


def _epoch_batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def per_sample_l1(logits: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
    """L1 divergence applied directly to logits, summed over classes."""
    return (logits - reference).abs().sum(dim=1)


def _fit(
    model: nn.Module,
    images: torch.Tensor,
    hard_labels: torch.Tensor,
    cfg: TrainRunConfig,
    primer: nn.Module | None = None,
) -> list[dict]:
    """Shared optimization loop; primer triggers the added L1 soft term."""
    generator = torch.Generator().manual_seed(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    scheduler = (
        torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.epochs)
        if cfg.schedule == "cosine"
        else None
    )
    if primer is not None:
        primer.eval()

    curves = []
    model.train()
    for epoch in range(cfg.epochs):
        ce_sum = l1_sum = 0.0
        seen = 0
        for batch_idx in _epoch_batches(len(images), cfg.batch_size, generator):
            x = images[batch_idx]
            y = hard_labels[batch_idx]
            logits = model(x)
            ce = F.cross_entropy(logits, y)
            loss = ce
            l1 = None
            if primer is not None:
                with torch.no_grad():
                    reference = primer(x)
                l1 = per_sample_l1(logits, reference).mean()
                loss = ce + cfg.l1_weight * l1
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch}: "
                    f"ce={ce.detach().item():.4g}"
                    + (f" l1={l1.detach().item():.4g}" if l1 is not None else "")
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            batch_n = len(batch_idx)
            ce_sum += ce.detach().item() * batch_n
            l1_sum += l1.detach().item() * batch_n if l1 is not None else 0.0
            seen += batch_n
        if scheduler is not None:
            scheduler.step()
        entry = {
            "epoch": epoch,
            "ce": ce_sum / seen,
            "l1": l1_sum / seen if primer is not None else 0.0,
            "lr": optimizer.param_groups[0]["lr"],
        }
        entry["total"] = entry["ce"] + cfg.l1_weight * entry["l1"]
        curves.append(entry)
    model.eval()
    return curves


def train_teacher(
    train_data: LabeledData,
    arch: str = "lenet5",
    epochs: int = 10,
    batch_size: int = 128,
    lr: float = 1e-3,
    seed: int = 0,
) -> tuple[nn.Module, list[dict]]:
    """Supervised pre-training of the teacher on real labeled data."""
    torch.manual_seed(seed)
    model = build_model(arch, train_data.num_classes, train_data.images.shape[1])
    cfg = TrainRunConfig(
        dataset_manifest="", teacher_checkpoint="", mode="hard_only",
        arch=arch, num_classes=train_data.num_classes,
        epochs=epochs, batch_size=batch_size, lr=lr, seed=seed,
    )
    curves = _fit(model, train_data.images, train_data.labels, cfg)
    return model, curves


def cache_teacher_labels(oracle: TeacherOracle, images: torch.Tensor) -> torch.Tensor:
    """Query each image once and keep the hard labels (they never change)."""
    return query_in_batches(oracle, images)


def train_primer(
    cfg: TrainRunConfig,
    oracle: TeacherOracle,
    images: torch.Tensor,
    labels: torch.Tensor | None = None,
) -> tuple[nn.Module, list[dict], torch.Tensor]:
    """Hard-KD: fit a fresh student to the teacher's hard labels.

    Returns (model, curves, cached labels).  In naive_noise mode the
    caller supplies noise images; the objective is unchanged.
    """
    if cfg.mode not in ("naive_noise", "hard_only"):
        raise ValueError("train_primer expects mode naive_noise or hard_only")
    if labels is None:
        labels = cache_teacher_labels(oracle, images)
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.arch, cfg.num_classes, images.shape[1])
    curves = _fit(model, images, labels, cfg)
    return model, curves, labels


def distill_student(
    cfg: TrainRunConfig,
    oracle: TeacherOracle,
    primer: nn.Module,
    images: torch.Tensor,
    labels: torch.Tensor | None = None,
) -> tuple[nn.Module, list[dict], torch.Tensor]:
    """Hard + soft distillation against cached hard labels and the frozen
    primer's logits.  The student starts from scratch unless warm_start."""
    if labels is None:
        labels = cache_teacher_labels(oracle, images)
    torch.manual_seed(cfg.seed + 1)
    model = build_model(cfg.arch, cfg.num_classes, images.shape[1])
    if cfg.warm_start:
        model.load_state_dict(primer.state_dict())
    for p in primer.parameters():
        p.requires_grad_(False)
    curves = _fit(model, images, labels, cfg, primer=primer)
    return model, curves, labels


def export_embeddings(model: nn.Module, images: torch.Tensor, path, batch_size: int = 512) -> np.ndarray:
    """Write backbone features for every image to a DIPE file."""
    model.eval()
    rows = []
    with torch.no_grad():
        for start in range(0, images.shape[0], batch_size):
            rows.append(model.backbone(images[start : start + batch_size]).numpy())
    matrix = np.concatenate(rows, axis=0).astype(np.float32)
    write_dipe(path, matrix)
    return matrix
