"""Contrastive dataset optimization through the primer's backbone.

An instance discriminator maps backbone features to an embedding space
where each image should be similar to its augmented view and dissimilar
to every other image in the batch.  Gradients flow into both the
discriminator and the image pixels themselves; pixels are projected back
into [0, 1] after every step and re-emitted as a new shard set.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.nn import functional as F

from .io import read_manifest, sha256_file, write_dipf, write_manifest
from .models import InstanceDiscriminator


def cosine_sim(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of two vectors (or row-wise for matching shapes)."""
    u_norm = u.norm(dim=-1)
    v_norm = v.norm(dim=-1)
    if (u_norm == 0).any() or (v_norm == 0).any():
        raise ValueError("cosine similarity is undefined for zero vectors")
    return (u * v).sum(dim=-1) / (u_norm * v_norm)


@dataclass
class ContrastBatch:
    """Anchors with their positive views; negatives are the other anchors.

    Anchor i's negative set is {anchors[j] : j != i}, which by
    construction excludes both the anchor and its own positive.
    """

    anchors: torch.Tensor
    positives: torch.Tensor

    def __post_init__(self):
        if self.anchors.shape != self.positives.shape:
            raise ValueError("anchors and positives must share one shape")
        if self.anchors.shape[0] < 2:
            raise ValueError("contrast needs a batch of at least 2 (no negatives otherwise)")

    def negatives_of(self, i: int) -> torch.Tensor:
        keep = [j for j in range(self.anchors.shape[0]) if j != i]
        return self.anchors[keep]


def contrastive_loss_from_embeddings(
    anchor_emb: torch.Tensor,
    positive_emb: torch.Tensor,
    standard_infonce: bool = False,
    temperature: float = 1.0,
) -> torch.Tensor:
    """Per-anchor -log( exp(sim to positive) / sum over negatives ).

    The default follows the objective verbatim: no temperature, and the
    positive term absent from the denominator (negatives are the other
    anchors).  standard_infonce switches to the common form with the
    positive included and similarities divided by temperature.
    """
    if anchor_emb.shape[0] < 2:
        raise ValueError("need at least 2 anchors for in-batch negatives")
    n = anchor_emb.shape[0]
    a_norm = anchor_emb.norm(dim=1)
    p_norm = positive_emb.norm(dim=1)
    if (a_norm == 0).any() or (p_norm == 0).any():
        raise ValueError("cosine similarity is undefined for zero vectors")
    anchors = anchor_emb / a_norm[:, None]
    positives = positive_emb / p_norm[:, None]

    pos_sim = (anchors * positives).sum(dim=1)
    sim_matrix = anchors @ anchors.T
    off_diag = ~torch.eye(n, dtype=torch.bool)

    if standard_infonce:
        pos = pos_sim / temperature
        negs = (sim_matrix / temperature).masked_fill(~off_diag, float("-inf"))
        denominator = torch.logsumexp(torch.cat([pos[:, None], negs], dim=1), dim=1)
        return (-pos + denominator).mean()

    negs = sim_matrix.masked_fill(~off_diag, float("-inf"))
    return (-pos_sim + torch.logsumexp(negs, dim=1)).mean()


def contrastive_loss(
    batch: ContrastBatch,
    backbone_fn,
    discriminator: InstanceDiscriminator,
    standard_infonce: bool = False,
    temperature: float = 1.0,
) -> torch.Tensor:
    """Embed anchors and positives through backbone + discriminator, then
    apply the contrastive objective."""
    anchor_emb = discriminator(backbone_fn(batch.anchors))
    positive_emb = discriminator(backbone_fn(batch.positives))
    return contrastive_loss_from_embeddings(
        anchor_emb, positive_emb, standard_infonce=standard_infonce, temperature=temperature
    )


def resized_crop(x: torch.Tensor, top: int, left: int, crop_h: int, crop_w: int) -> torch.Tensor:
    """Crop a (C, H, W) image and resize back to its original size."""
    _, h, w = x.shape
    window = x[:, top : top + crop_h, left : left + crop_w]
    if (crop_h, crop_w) == (h, w):
        return window
    return F.interpolate(
        window[None], size=(h, w), mode="bilinear", align_corners=False
    )[0].clamp(0.0, 1.0)


def hflip(x: torch.Tensor) -> torch.Tensor:
    return torch.flip(x, dims=[-1])


def make_positive_view(
    x: torch.Tensor,
    generator: torch.Generator,
    crop_scale_min: float = 0.6,
    crop_scale_max: float = 1.0,
    flip_prob: float = 0.5,
    brightness: float = 0.2,
) -> torch.Tensor:
    """Augmented view: random resized crop, horizontal flip, brightness
    jitter.  All strengths are parameters so tests can zero them."""
    _, h, w = x.shape
    area = crop_scale_min + (crop_scale_max - crop_scale_min) * float(
        torch.rand((), generator=generator)
    )
    side = math.sqrt(area)
    crop_h = max(1, min(h, round(h * side)))
    crop_w = max(1, min(w, round(w * side)))
    top = int(torch.randint(0, h - crop_h + 1, (), generator=generator))
    left = int(torch.randint(0, w - crop_w + 1, (), generator=generator))
    view = resized_crop(x, top, left, crop_h, crop_w)
    if float(torch.rand((), generator=generator)) < flip_prob:
        view = hflip(view)
    if brightness > 0:
        delta = (2 * float(torch.rand((), generator=generator)) - 1) * brightness
        view = (view + delta).clamp(0.0, 1.0)
    return view


def make_positive_views(batch: torch.Tensor, generator: torch.Generator, **strengths) -> torch.Tensor:
    return torch.stack([make_positive_view(x, generator, **strengths) for x in batch])


def held_out_contrast_loss(
    pixels: torch.Tensor,
    backbone_fn,
    discriminator: InstanceDiscriminator,
    seed: int,
    batch_size: int = 64,
    batches: int = 4,
) -> float:
    """Mean contrastive loss over fixed seeded evaluation batches."""
    generator = torch.Generator().manual_seed(seed)
    total = 0.0
    with torch.no_grad():
        for _ in range(batches):
            idx = torch.randperm(pixels.shape[0], generator=generator)[:batch_size]
            anchors = pixels[idx]
            views = make_positive_views(anchors, generator)
            loss = contrastive_loss(ContrastBatch(anchors, views), backbone_fn, discriminator)
            total += float(loss)
    return total / batches


def optimize_dataset(
    manifest_path,
    primer,
    out_dir,
    steps: int = 200,
    image_lr: float = 1e-2,
    discriminator_lr: float = 1e-3,
    batch_size: int = 256,
    seed: int = 0,
    hidden_dim: int = 256,
    embed_dim: int = 128,
    standard_infonce: bool = False,
    temperature: float = 1.0,
    checkpoint_every: int = 10,
) -> Path:
    """Jointly optimize the discriminator and the dataset pixels.

    Emits a new shard set with the parent's layout plus a provenance
    block (parent manifest hash, steps, image_lr).  Pixels are clamped
    to [0, 1] after every step.  On a non-finite loss the dataset is
    rolled back to the last checkpoint, written out, and the error
    raised with the output path in the message.
    """
    from .io import load_prior_dataset

    manifest_path = Path(manifest_path)
    parent = read_manifest(manifest_path)
    images = load_prior_dataset(manifest_path)

    torch.manual_seed(seed)
    primer.eval()
    for p in primer.parameters():
        p.requires_grad_(False)
    discriminator = InstanceDiscriminator(primer.feature_dim, hidden_dim, embed_dim)

    pixels = torch.from_numpy(images.copy())
    pixels.requires_grad_(True)
    optimizer = torch.optim.Adam(
        [
            {"params": discriminator.parameters(), "lr": discriminator_lr},
            {"params": [pixels], "lr": image_lr},
        ]
    )
    generator = torch.Generator().manual_seed(seed)
    batch_size = min(batch_size, pixels.shape[0])

    last_good = pixels.detach().clone()
    aborted_at = None
    for step in range(steps):
        idx = torch.randperm(pixels.shape[0], generator=generator)[:batch_size]
        anchors = pixels[idx]
        views = make_positive_views(anchors, generator)
        loss = contrastive_loss(
            ContrastBatch(anchors, views),
            primer.backbone,
            discriminator,
            standard_infonce=standard_infonce,
            temperature=temperature,
        )
        if not torch.isfinite(loss):
            aborted_at = step
            with torch.no_grad():
                pixels.data.copy_(last_good)
            break
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        with torch.no_grad():
            pixels.clamp_(0.0, 1.0)
        if (step + 1) % checkpoint_every == 0:
            last_good = pixels.detach().clone()

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    final = pixels.detach().numpy()
    # Atomic rewrite: shards land under temp names and swap in only after
    # a complete write; the manifest goes last as the commit marker.
    shards = []
    staged = []
    try:
        for shard in parent["shards"]:
            chunk = final[shard["start"] : shard["start"] + shard["count"]]
            shard_path = out / shard["path"]
            temp_path = out / (shard["path"] + ".tmp")
            write_dipf(temp_path, chunk)
            staged.append((temp_path, shard_path))
            shards.append({**shard, "sha256": sha256_file(temp_path)})
        for temp_path, shard_path in staged:
            os.replace(temp_path, shard_path)
    except BaseException:
        for temp_path, _ in staged:
            temp_path.unlink(missing_ok=True)
        raise

    manifest = dict(parent)
    manifest["shards"] = shards
    manifest["provenance"] = {
        "parent_manifest_sha256": sha256_file(manifest_path),
        "steps": steps,
        "image_lr": image_lr,
        "discriminator_lr": discriminator_lr,
        "seed": seed,
        "aborted_at_step": aborted_at,
    }
    out_manifest = out / "manifest.json"
    write_manifest(out_manifest, manifest)
    if aborted_at is not None:
        raise RuntimeError(
            f"contrast optimization hit a non-finite loss at step {aborted_at}; "
            f"last-good dataset written to {out_manifest}"
        )
    return out_manifest
