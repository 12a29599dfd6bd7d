"""Student/teacher architectures and the instance discriminator.

Each classifier exposes `backbone(x)` (the penultimate feature vector)
and `forward(x)` (class logits); `feature_dim` names the backbone width.
"""

from __future__ import annotations

import torch
from torch import nn


class LeNet5(nn.Module):
    """LeNet5 variant for 1x28x28 inputs; backbone width 84."""

    feature_dim = 84

    def __init__(self, num_classes: int = 10, in_channels: int = 1, width_scale: float = 1.0):
        super().__init__()
        c1 = max(1, int(6 * width_scale))
        c2 = max(1, int(16 * width_scale))
        f1 = max(2, int(120 * width_scale))
        f2 = max(2, int(84 * width_scale))
        self.feature_dim = f2
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, c1, kernel_size=5, padding=2),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c1, c2, kernel_size=5),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        self.fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(c2 * 5 * 5, f1),
            nn.ReLU(inplace=True),
            nn.Linear(f1, f2),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Linear(f2, num_classes)

    def backbone(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


class SmallCNN(nn.Module):
    """Compact CNN for 3x32x32 inputs; backbone width 256."""

    feature_dim = 256

    def __init__(self, num_classes: int = 10, in_channels: int = 3, width_scale: float = 1.0):
        super().__init__()
        c1 = max(1, int(32 * width_scale))
        c2 = max(1, int(64 * width_scale))
        f = max(2, int(256 * width_scale))
        self.feature_dim = f
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, c1, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(c1, c1, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(c1, c2, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
        )
        self.fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(c2 * 8 * 8, f),
            nn.ReLU(inplace=True),
        )
        self.head = nn.Linear(f, num_classes)

    def backbone(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


ARCHITECTURES = {"lenet5": LeNet5, "smallcnn": SmallCNN}


def build_model(arch: str, num_classes: int, in_channels: int, width_scale: float = 1.0) -> nn.Module:
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}")
    return ARCHITECTURES[arch](num_classes=num_classes, in_channels=in_channels, width_scale=width_scale)


class InstanceDiscriminator(nn.Module):
    """Shallow MLP head mapping backbone features to the similarity space."""

    def __init__(self, in_dim: int, hidden_dim: int = 256, out_dim: int = 128):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(in_dim, hidden_dim),
            nn.ReLU(inplace=True),
            nn.Linear(hidden_dim, out_dim),
        )

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.net(features)


def save_checkpoint(path, model: nn.Module, meta: dict) -> None:
    torch.save({"state_dict": model.state_dict(), "meta": meta}, path)


def load_checkpoint(path) -> tuple[dict, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    return payload["state_dict"], payload["meta"]


def build_from_checkpoint(path) -> nn.Module:
    state, meta = load_checkpoint(path)
    model = build_model(
        meta["arch"], meta["num_classes"], meta["in_channels"], meta.get("width_scale", 1.0)
    )
    model.load_state_dict(state)
    model.eval()
    return model
