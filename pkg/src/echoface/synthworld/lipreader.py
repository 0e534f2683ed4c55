"""Frozen lip-reading expert over canonical mouth crops.

A per-frame conv encoder followed by temporal convolutions emits
per-step log-probabilities over the content vocabulary. Activations are
smooth (SiLU) throughout so gradients through the expert admit
finite-difference checks.
"""

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..seeding import rng, seed_torch
from .render import CROP_H, CROP_W, mouth_crops_from_coeffs
from .types import MOUTH_DIM


class LipReader(nn.Module):
    def __init__(self, n_contents: int, feat: int = 64):
        super().__init__()
        self.n_contents = n_contents
        self.frame_net = nn.Sequential(
            nn.Conv2d(1, 16, 3, stride=2, padding=1),
            nn.SiLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1),
            nn.SiLU(),
        )
        self.frame_proj = nn.Linear(32 * (CROP_H // 4) * (CROP_W // 4), feat)
        self.temporal = nn.Sequential(
            nn.Conv1d(feat, feat, 5, padding=2),
            nn.SiLU(),
            nn.Conv1d(feat, feat, 5, padding=2),
            nn.SiLU(),
        )
        self.head = nn.Linear(feat, n_contents)

    def forward(self, crops: torch.Tensor) -> torch.Tensor:
        """crops: (B, L, 16, 24) darkness images -> (B, L, C) log-probs."""
        if crops.shape[-2:] != (CROP_H, CROP_W):
            raise ValueError(f"expected ({CROP_H}, {CROP_W}) crops, got {tuple(crops.shape[-2:])}")
        b, length = crops.shape[0], crops.shape[1]
        h = self.frame_net(crops.reshape(b * length, 1, CROP_H, CROP_W))
        h = F.silu(self.frame_proj(h.reshape(b * length, -1)))
        h = h.reshape(b, length, -1).transpose(1, 2)
        h = self.temporal(h).transpose(1, 2)
        return F.log_softmax(self.head(h), dim=-1)

    def clip_logits(self, crops: torch.Tensor) -> torch.Tensor:
        """Aggregate per-step log-probs into one clip-level score."""
        return self(crops).mean(dim=1)


def expert_loss(expert: LipReader, crops: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean per-step cross-entropy against the clip's content label."""
    logp = expert(crops)
    return F.nll_loss(logp.reshape(-1, expert.n_contents),
                      labels[:, None].expand(-1, crops.shape[1]).reshape(-1))


def train_lip_reader(cfg, corpus, seed: int) -> LipReader:
    """Train the expert on canonical crops computed from ground-truth
    mouth coefficients, with contrast-scale augmentation so it also reads
    crops extracted from textured or generated frames."""
    seed_torch(seed, "lip-init")
    model = LipReader(cfg["world.n_contents"])
    opt = torch.optim.Adam(model.parameters(), lr=cfg["lip.lr"])
    g = rng(seed, "lip-data")
    samples = corpus.train_samples
    for _ in range(cfg["lip.steps"]):
        batch_idx = g.integers(len(samples), size=cfg["lip.batch"])
        betas = np.stack([samples[i].coeffs.beta[:, :MOUTH_DIM] for i in batch_idx])
        labels = torch.tensor([samples[i].utterance.content_id for i in batch_idx])
        crops = mouth_crops_from_coeffs(torch.from_numpy(betas).to(torch.float32))
        scale = torch.from_numpy(g.uniform(0.5, 1.0, size=(len(batch_idx), 1, 1, 1))).to(torch.float32)
        noise = torch.from_numpy(g.normal(0.0, 0.01, size=crops.shape)).to(torch.float32)
        opt.zero_grad()
        loss = expert_loss(model, crops * scale + noise, labels)
        loss.backward()
        opt.step()
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def clip_accuracy(expert: LipReader, crops: torch.Tensor, labels: torch.Tensor) -> float:
    with torch.no_grad():
        pred = expert.clip_logits(crops).argmax(dim=-1)
    return float((pred == labels).to(torch.float32).mean())
