"""Accuracy evaluation, structured reports, and plots."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import LabeledData


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list[float]
    confusion: list[list[int]]  # confusion[true][predicted]
    n: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion,
            "n": self.n,
        }


def evaluate(model, data: LabeledData, batch_size: int = 512) -> EvalReport:
    """Top-1 accuracy with per-class breakdown and confusion counts."""
    model.eval()
    k = data.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            x = data.images[start : start + batch_size]
            y = data.labels[start : start + batch_size]
            predicted = model(x).argmax(dim=1)
            for t, p in zip(y.numpy(), predicted.numpy()):
                confusion[t, p] += 1
    totals = confusion.sum(axis=1)
    correct = np.diag(confusion)
    per_class = [
        float(correct[i] / totals[i]) if totals[i] else 0.0 for i in range(k)
    ]
    return EvalReport(
        accuracy=float(correct.sum() / max(1, confusion.sum())),
        per_class_accuracy=per_class,
        confusion=confusion.tolist(),
        n=int(confusion.sum()),
    )


def write_report(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def plot_training_curves(curves: list[dict], path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [c["epoch"] for c in curves]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [c["ce"] for c in curves], label="cross-entropy")
    if any(c.get("l1") for c in curves):
        ax.plot(epochs, [c["l1"] for c in curves], label="logit L1")
        ax.plot(epochs, [c["total"] for c in curves], label="total", linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_budget_sweep(budgets: list[int], accuracies: list[float], path) -> None:
    """Accuracy as a function of the synthetic dataset size."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(budgets, [a * 100 for a in accuracies], marker="o")
    ax.set_xscale("log")
    ax.set_xlabel("number of synthetic images")
    ax.set_ylabel("test accuracy (%)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
