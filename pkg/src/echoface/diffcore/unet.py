"""Denoising network: a small U-Net over the 4x8x8 latent with timestep
embedding, cross-attention on prompt embeddings at every resolution, and
additive injection points for spatial-condition features on the encoder
side of each scale."""

import math

import torch
import torch.nn as nn


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half
    ).to(t.device)
    args = t.to(torch.float64)[:, None] * freqs[None, :]
    emb = torch.cat([torch.cos(args), torch.sin(args)], dim=-1)
    return emb.to(torch.float32 if t.dtype != torch.float64 else torch.float64)


def _gn(ch):
    return nn.GroupNorm(min(8, ch), ch)


class ResBlock(nn.Module):
    def __init__(self, ch_in, ch_out, t_dim):
        super().__init__()
        self.norm1 = _gn(ch_in)
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, padding=1)
        self.t_proj = nn.Linear(t_dim, ch_out)
        self.norm2 = _gn(ch_out)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, padding=1)
        self.skip = nn.Conv2d(ch_in, ch_out, 1) if ch_in != ch_out else nn.Identity()
        self.act = nn.SiLU()

    def forward(self, x, temb):
        h = self.conv1(self.act(self.norm1(x)))
        h = h + self.t_proj(self.act(temb))[:, :, None, None]
        h = self.conv2(self.act(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    def __init__(self, ch, d_txt, heads=4):
        super().__init__()
        assert ch % heads == 0
        self.heads = heads
        self.norm = _gn(ch)
        self.q = nn.Linear(ch, ch)
        self.k = nn.Linear(d_txt, ch)
        self.v = nn.Linear(d_txt, ch)
        self.out = nn.Linear(ch, ch)

    def forward(self, x, y):
        b, c, h, w = x.shape
        tokens = self.norm(x).reshape(b, c, h * w).transpose(1, 2)
        q = self.q(tokens).reshape(b, h * w, self.heads, -1).transpose(1, 2)
        k = self.k(y).reshape(b, y.shape[1], self.heads, -1).transpose(1, 2)
        v = self.v(y).reshape(b, y.shape[1], self.heads, -1).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1]), dim=-1)
        mixed = (attn @ v).transpose(1, 2).reshape(b, h * w, c)
        return x + self.out(mixed).transpose(1, 2).reshape(b, c, h, w)


class Denoiser(nn.Module):
    def __init__(self, z_channels: int = 4, channels=(64, 96, 128),
                 d_txt: int = 128, heads: int = 4):
        super().__init__()
        self.channels = tuple(channels)
        t_dim = channels[0] * 2
        self.t_dim = t_dim
        self.t_mlp = nn.Sequential(nn.Linear(t_dim, t_dim), nn.SiLU(), nn.Linear(t_dim, t_dim))

        self.conv_in = nn.Conv2d(z_channels, channels[0], 3, padding=1)
        self.enc_res = nn.ModuleList()
        self.enc_attn = nn.ModuleList()
        self.downs = nn.ModuleList()
        for i, ch in enumerate(channels):
            self.enc_res.append(ResBlock(ch, ch, t_dim))
            self.enc_attn.append(CrossAttention(ch, d_txt, heads))
            if i + 1 < len(channels):
                self.downs.append(nn.Conv2d(ch, channels[i + 1], 3, stride=2, padding=1))

        self.mid1 = ResBlock(channels[-1], channels[-1], t_dim)
        self.mid_attn = CrossAttention(channels[-1], d_txt, heads)
        self.mid2 = ResBlock(channels[-1], channels[-1], t_dim)

        self.ups = nn.ModuleList()
        self.dec_res = nn.ModuleList()
        self.dec_attn = nn.ModuleList()
        for i in reversed(range(len(channels))):
            if i + 1 < len(channels):
                self.ups.append(nn.Conv2d(channels[i + 1], channels[i], 3, padding=1))
            self.dec_res.append(ResBlock(2 * channels[i], channels[i], t_dim))
            self.dec_attn.append(CrossAttention(channels[i], d_txt, heads))

        self.norm_out = _gn(channels[0])
        self.conv_out = nn.Conv2d(channels[0], z_channels, 3, padding=1)
        self.act = nn.SiLU()
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")

    def feature_shapes(self, latent_hw: int = 8):
        """Per-scale (channels, height, width) where F_sc is injected."""
        return [
            (ch, latent_hw // (2**i), latent_hw // (2**i))
            for i, ch in enumerate(self.channels)
        ]

    def forward(self, z, t, y, f_sc=None):
        if y.ndim == 2:
            y = y[None]
        if f_sc is not None:
            want = self.feature_shapes(z.shape[-1])
            if len(f_sc) != len(want):
                raise ValueError(f"expected {len(want)} condition scales, got {len(f_sc)}")
            for fs, (ch, hh, ww) in zip(f_sc, want):
                if tuple(fs.shape[-3:]) != (ch, hh, ww):
                    raise ValueError(
                        f"condition feature shape {tuple(fs.shape[-3:])} does not match {(ch, hh, ww)}"
                    )
        t = torch.as_tensor(t, device=z.device)
        if t.ndim == 0:
            t = t[None].expand(z.shape[0])
        temb = self.t_mlp(timestep_embedding(t, self.t_dim).to(z.dtype))

        h = self.conv_in(z)
        skips = []
        for i in range(len(self.channels)):
            if f_sc is not None:
                h = h + f_sc[i]
            h = self.enc_res[i](h, temb)
            h = self.enc_attn[i](h, y)
            skips.append(h)
            if i < len(self.downs):
                h = self.downs[i](h)

        h = self.mid2(self.mid_attn(self.mid1(h, temb), y), temb)

        for j, i in enumerate(reversed(range(len(self.channels)))):
            h = torch.cat([h, skips[i]], dim=1)
            h = self.dec_res[j](h, temb)
            h = self.dec_attn[j](h, y)
            if i > 0:
                h = self.ups[j](self.upsample(h))
        return self.conv_out(self.act(self.norm_out(h)))
