"""Backbone bundle (VAE + denoiser + text encoder + schedule) and its
one-off training. After `train_backbone` the whole bundle is frozen; the
adapters are the only trainable things left."""

from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..ckpt import (
    load_checkpoint,
    load_module_blocks,
    module_blocks,
    module_checksum,
    save_checkpoint,
)
from ..seeding import rng, seed_torch, torch_generator
from .sampler import ddim_sample
from .schedule import NoiseSchedule, q_sample
from .text import TextEncoder, caption_for_labels, tokenize
from .unet import Denoiser
from .vae import ConvVAE


def backbone_checkpoint_path(workdir) -> Path:
    return Path(workdir) / "backbone.ckpt"


class Backbone(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        base = cfg["diff.vae_base"]
        zc = cfg["diff.latent_channels"]
        ch0 = cfg["diff.base_channels"]
        self.vae = ConvVAE(base=base, z_channels=zc)
        self.unet = Denoiser(z_channels=zc, channels=(ch0, ch0 + ch0 // 2, 2 * ch0),
                             d_txt=cfg["diff.d_txt"], heads=4)
        self.text = TextEncoder(d_txt=cfg["diff.d_txt"], layers=cfg["diff.text_layers"],
                                heads=cfg["diff.text_heads"], max_len=cfg["diff.max_prompt_len"])
        self.schedule = NoiseSchedule(cfg["diff.t_train"], cfg["diff.schedule"])
        self.register_buffer("latent_scale", torch.ones(1))

    # -- latent space -----------------------------------------------------
    def encode_latent(self, imgs: torch.Tensor) -> torch.Tensor:
        """Posterior mean, scaled to unit-ish variance. imgs: (B,3,H,W)."""
        mu, _ = self.vae.encode(imgs)
        return mu * self.latent_scale

    def decode_latent(self, z: torch.Tensor, blend_hook=None) -> torch.Tensor:
        return self.vae.decode(z / self.latent_scale, blend_hook)

    def latent_hw(self) -> int:
        return self.cfg["world.image_size"] // 8

    # -- conditioning -----------------------------------------------------
    def prompt_embedding(self, prompt_text: str) -> torch.Tensor:
        emb = self.text.embed_ids(tokenize(prompt_text))
        return self.text(emb)

    def eps_fn(self, y: torch.Tensor, f_sc=None):
        def fn(z, t):
            return self.unet(z, t, y, f_sc)
        return fn

    def freeze(self):
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)
        return self

    def checksum(self) -> str:
        return module_checksum(self)


def frames_to_tensor(frames) -> torch.Tensor:
    arrs = [f.pixels if hasattr(f, "pixels") else f for f in frames]
    x = torch.from_numpy(np.stack(arrs).astype(np.float32))
    return x.permute(0, 3, 1, 2)


def tensor_to_frames(x: torch.Tensor) -> list:
    from ..synthworld.types import Frame

    imgs = x.detach().clamp(0.0, 1.0).permute(0, 2, 3, 1).numpy().astype(np.float32)
    return [Frame(pixels=img, kind="generated") for img in imgs]


def _sample_frames(corpus, g, n):
    samples = corpus.train_samples
    picked = []
    for _ in range(n):
        s = samples[int(g.integers(len(samples)))]
        t = int(g.integers(s.coeffs.length))
        picked.append((s, t))
    return picked


def train_backbone(cfg, corpus, seed: int, workdir, registry=None) -> Path:
    """Train the autoencoder, fit the latent scale, then train the
    denoiser and text encoder jointly under the noise-prediction
    objective with caption templates from sample labels."""
    if registry is not None:
        registry.check_order("backbone", cfg.hash())

    seed_torch(seed, "backbone-init")
    model = Backbone(cfg)
    g = rng(seed, "backbone-data")

    # phase A: autoencoder
    vae_params = list(model.vae.parameters())
    opt = torch.optim.AdamW(vae_params, lr=cfg["diff.vae_lr"], weight_decay=1e-5)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=cfg["diff.vae_steps"], eta_min=0.1 * cfg["diff.vae_lr"])
    gen = torch_generator(seed, "backbone-vae-noise")
    vae_log = []
    kl_w = cfg["diff.kl_weight"]
    for _ in range(cfg["diff.vae_steps"]):
        batch = _sample_frames(corpus, g, cfg["diff.vae_batch"])
        x = frames_to_tensor([corpus.render_frame(s, t) for s, t in batch])
        mu, logvar = model.vae.encode(x)
        std = torch.exp(0.5 * logvar)
        z = mu + std * torch.randn(mu.shape, generator=gen)
        recon = model.vae.decode(z)
        kl = 0.5 * (mu.square() + logvar.exp() - 1.0 - logvar).mean()
        loss = F.mse_loss(recon, x) + kl_w * kl
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        vae_log.append(loss.detach().item())
    model.vae.eval()
    for p in vae_params:
        p.requires_grad_(False)

    # latent scale from a corpus sample
    with torch.no_grad():
        batch = _sample_frames(corpus, g, 64)
        x = frames_to_tensor([corpus.render_frame(s, t) for s, t in batch])
        mu, _ = model.vae.encode(x)
        model.latent_scale.fill_(1.0 / max(float(mu.std()), 1e-6))

    # phase B: denoiser + text encoder
    diff_params = list(model.unet.parameters()) + list(model.text.parameters())
    opt = torch.optim.AdamW(diff_params, lr=cfg["diff.lr"], weight_decay=1e-5)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=cfg["diff.steps"], eta_min=0.1 * cfg["diff.lr"])
    gen = torch_generator(seed, "backbone-diff-noise")
    diff_log = []
    t_train = cfg["diff.t_train"]
    for _ in range(cfg["diff.steps"]):
        batch = _sample_frames(corpus, g, cfg["diff.batch"])
        x = frames_to_tensor([corpus.render_frame(s, t) for s, t in batch])
        with torch.no_grad():
            z0 = model.encode_latent(x)
        ids = [
            tokenize(caption_for_labels(s.identity.age, s.identity.gender,
                                        s.utterance.emotion_id))
            for s, _ in batch
        ]
        emb = torch.stack([model.text.embed_ids(i) for i in ids])
        y = model.text(emb)
        t = torch.from_numpy(g.integers(1, t_train + 1, size=z0.shape[0]))
        eps = torch.randn(z0.shape, generator=gen)
        z_t = q_sample(z0, t.numpy(), eps, model.schedule)
        pred = model.unet(z_t, t, y)
        loss = F.mse_loss(pred, eps)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        diff_log.append(loss.detach().item())

    model.freeze()
    path = backbone_checkpoint_path(workdir)
    save_checkpoint(path, "backbone", cfg.hash(), module_blocks(model))
    Path(f"{path}.vae_loss.txt").write_text("\n".join(map(repr, vae_log)) + "\n")
    Path(f"{path}.diff_loss.txt").write_text("\n".join(map(repr, diff_log)) + "\n")
    if registry is not None:
        registry.record("backbone", path, cfg.hash(), model.checksum())
    return path


def load_backbone(cfg, path) -> Backbone:
    stage, _, blocks = load_checkpoint(path, cfg.hash())
    if stage != "backbone":
        raise ValueError(f"checkpoint at {path} holds stage {stage!r}, wanted 'backbone'")
    seed_torch(0, "backbone-load")
    model = Backbone(cfg)
    load_module_blocks(model, blocks)
    return model.freeze()


@torch.no_grad()
def sample_images(backbone: Backbone, prompt_text: str, n: int, seed: int,
                  steps: int | None = None, f_sc=None) -> torch.Tensor:
    """Generate n images from the given prompt; deterministic in seed."""
    steps = backbone.cfg["diff.sample_steps"] if steps is None else steps
    gen = torch_generator(seed, "sample-images")
    hw = backbone.latent_hw()
    z_t = torch.randn((n, backbone.cfg["diff.latent_channels"], hw, hw), generator=gen)
    y = backbone.prompt_embedding(prompt_text)[None].expand(n, -1, -1)
    z0 = ddim_sample(backbone.eps_fn(y, f_sc), z_t, steps, backbone.schedule,
                     eta=backbone.cfg["diff.eta"])
    return backbone.decode_latent(z0).clamp(0.0, 1.0)
