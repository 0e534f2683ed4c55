"""Head matting: analytic for procedural frames, a tiny learned
segmenter for generated ones."""

import numpy as np
import torch
import torch.nn as nn

from ..seeding import rng, seed_torch
from .render import analytic_silhouette, render_textured
from .types import Frame


class TinySegmenter(nn.Module):
    """Small dilated conv stack predicting per-pixel head logits."""

    def __init__(self, width: int = 24):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, width, 3, padding=1),
            nn.SiLU(),
            nn.Conv2d(width, width, 3, padding=2, dilation=2),
            nn.SiLU(),
            nn.Conv2d(width, width, 3, padding=4, dilation=4),
            nn.SiLU(),
            nn.Conv2d(width, 1, 3, padding=1),
        )

    def forward(self, x):
        return self.net(x)


class Matting:
    """MODNet stand-in. Call with any Frame; rendered frames take the
    analytic path, generated frames the learned one."""

    def __init__(self, cfg, segmenter: TinySegmenter | None = None):
        self.cfg = cfg
        self.segmenter = segmenter

    def __call__(self, frame: Frame) -> Frame:
        if frame.geometry is not None:
            alpha, _, pose = frame.geometry
            return analytic_silhouette(self.cfg, alpha, pose)
        if self.segmenter is None:
            raise RuntimeError("matting on generated frames needs a trained segmenter")
        with torch.no_grad():
            x = torch.from_numpy(frame.pixels.astype(np.float32)).permute(2, 0, 1)[None]
            logits = self.segmenter(x)[0, 0]
            mask = (torch.sigmoid(logits) >= 0.5).to(torch.float32).numpy()
        return Frame(pixels=mask, kind="mask")


def train_matting(cfg, corpus, seed: int) -> TinySegmenter:
    """Fit the tiny segmenter on textured renders vs analytic silhouettes."""
    seed_torch(seed, "matting-init")
    model = TinySegmenter()
    opt = torch.optim.Adam(model.parameters(), lr=cfg["matting.lr"])
    g = rng(seed, "matting-data")
    samples = corpus.train_samples
    bce = nn.BCEWithLogitsLoss()
    for _ in range(cfg["matting.steps"]):
        imgs, masks = [], []
        for _ in range(cfg["matting.batch"]):
            s = samples[g.integers(len(samples))]
            t = int(g.integers(s.coeffs.length))
            frame = corpus.render_frame(s, t)
            sil = analytic_silhouette(cfg, s.coeffs.alpha, s.coeffs.pose[t])
            imgs.append(frame.pixels)
            masks.append(sil.pixels)
        x = torch.from_numpy(np.stack(imgs)).permute(0, 3, 1, 2)
        y = torch.from_numpy(np.stack(masks))[:, None]
        opt.zero_grad()
        loss = bce(model(x), y)
        loss.backward()
        opt.step()
    model.eval()
    return model
