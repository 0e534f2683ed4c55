"""Transformer encoders/decoders for the three disentanglement stages.

All stages share the same recipe: project audio frames into the model
width, add sinusoidal position codes, run a small transformer. The
identity stage prepends a learnable shape token whose output slot feeds
the shape head, while the remaining slots are projected per step and
mean-pooled into the identity embedding. Content and emotion reuse the
frozen earlier stages as conditioning.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import InvariantError

ALPHA_DIM = 80
BETA_DIM = 64


def sinusoidal_pe(length: int, d_model: int, dtype=torch.float32) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float64)[:, None]
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64)
                    * (-math.log(10000.0) / d_model))
    pe = torch.zeros(length, d_model, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(position * div)
    pe[:, 1::2] = torch.cos(position * div)
    return pe.to(dtype)


class Mlp(nn.Module):
    """Two-layer MLP with a smooth nonlinearity."""

    def __init__(self, d_in: int, d_out: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or max(d_in, d_out)
        self.net = nn.Sequential(nn.Linear(d_in, hidden), nn.GELU(), nn.Linear(hidden, d_out))

    def forward(self, x):
        return self.net(x)


def _encoder(d_model: int, heads: int, layers: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=d_model,
        nhead=heads,
        dim_feedforward=2 * d_model,
        dropout=0.0,
        activation="gelu",
        batch_first=True,
    )
    return nn.TransformerEncoder(layer, num_layers=layers)


def _check_finite(audio: torch.Tensor):
    if not torch.isfinite(audio).all():
        raise ValueError("audio features contain non-finite entries")


@dataclass
class IdentityOut:
    alpha_hat: torch.Tensor  # (B, 80)
    theta_id: torch.Tensor  # (B, 512)
    token_out: torch.Tensor  # (B, d_model), the shape-token slot pre-head
    seq_out: torch.Tensor  # (B, L, d_model), frame slots pre-projection
    seq_theta: torch.Tensor  # (B, L, 512), per-step embeddings pre-pool


class IdentityEncoder(nn.Module):
    def __init__(self, d_audio: int, d_model: int = 128, heads: int = 4,
                 layers: int = 4, theta_dim: int = 512):
        super().__init__()
        self.in_proj = Mlp(d_audio, d_model)
        self.shape_token = nn.Parameter(torch.zeros(d_model))
        self.encoder = _encoder(d_model, heads, layers)
        self.alpha_head = Mlp(d_model, ALPHA_DIM)
        self.sem_proj = Mlp(d_model, theta_dim)

    def forward(self, audio: torch.Tensor) -> IdentityOut:
        _check_finite(audio)
        b, length, _ = audio.shape
        frames = self.in_proj(audio)
        token = self.shape_token[None, None, :].expand(b, 1, -1)
        seq = torch.cat([token, frames], dim=1)
        seq = seq + sinusoidal_pe(length + 1, seq.shape[-1], seq.dtype).to(seq.device)[None]
        out = self.encoder(seq)
        token_out, seq_out = out[:, 0], out[:, 1:]
        seq_theta = self.sem_proj(seq_out)
        return IdentityOut(
            alpha_hat=self.alpha_head(token_out),
            theta_id=seq_theta.mean(dim=1),
            token_out=token_out,
            seq_out=seq_out,
            seq_theta=seq_theta,
        )


class ContentEncoder(nn.Module):
    def __init__(self, d_audio: int, d_model: int = 128, heads: int = 4, layers: int = 4):
        super().__init__()
        self.in_proj = Mlp(d_audio, d_model)
        self.encoder = _encoder(d_model, heads, layers)

    def forward(self, audio: torch.Tensor) -> torch.Tensor:
        _check_finite(audio)
        seq = self.in_proj(audio)
        seq = seq + sinusoidal_pe(seq.shape[1], seq.shape[-1], seq.dtype).to(seq.device)[None]
        return self.encoder(seq)


class ContentDecoder(nn.Module):
    """Maps linguistic features plus the shape estimate to mouth coefficients."""

    def __init__(self, d_model: int = 128, heads: int = 4, layers: int = 2):
        super().__init__()
        self.alpha_proj = Mlp(ALPHA_DIM, d_model)
        self.decoder = _encoder(d_model, heads, layers)
        self.out_head = Mlp(d_model, BETA_DIM)

    def forward(self, l_bar: torch.Tensor, alpha_hat: torch.Tensor) -> torch.Tensor:
        cond = self.alpha_proj(alpha_hat)[:, None, :]
        return self.out_head(self.decoder(l_bar + cond))


class EmotionEncoder(nn.Module):
    def __init__(self, d_audio: int, d_model: int = 128, heads: int = 4,
                 layers: int = 4, theta_dim: int = 512):
        super().__init__()
        self.in_proj = Mlp(d_audio, d_model)
        self.encoder = _encoder(d_model, heads, layers)
        self.e_proj = Mlp(d_model, theta_dim)

    def forward(self, audio: torch.Tensor):
        """Returns (theta_e, per-step embeddings pre-pool)."""
        _check_finite(audio)
        seq = self.in_proj(audio)
        seq = seq + sinusoidal_pe(seq.shape[1], seq.shape[-1], seq.dtype).to(seq.device)[None]
        seq_theta = self.e_proj(self.encoder(seq))
        return seq_theta.mean(dim=1), seq_theta


class EmotionDecoder(nn.Module):
    """Predicts the full expression from emotion, linguistic and shape cues."""

    def __init__(self, d_model: int = 128, heads: int = 4, layers: int = 2,
                 theta_dim: int = 512):
        super().__init__()
        self.e_in = Mlp(theta_dim, d_model)
        self.alpha_proj = Mlp(ALPHA_DIM, d_model)
        self.decoder = _encoder(d_model, heads, layers)
        self.out_head = Mlp(d_model, BETA_DIM)

    def forward(self, theta_e, l_bar, alpha_hat):
        cond = self.e_in(theta_e)[:, None, :] + self.alpha_proj(alpha_hat)[:, None, :]
        return self.out_head(self.decoder(l_bar + cond))


STAGE_MODULES = {
    "identity": ("identity_encoder",),
    "content": ("content_encoder", "content_decoder"),
    "emotion": ("emotion_encoder", "emotion_decoder"),
}


class PadStack:
    """All PAD stages plus bookkeeping about which are loaded/frozen."""

    def __init__(self, cfg):
        self.cfg = cfg
        d_audio = cfg["world.d_audio"]
        d_model = cfg["pad.d_model"]
        heads = cfg["pad.heads"]
        layers = cfg["pad.layers"]
        theta = cfg["pad.theta_dim"]
        self.identity_encoder = IdentityEncoder(d_audio, d_model, heads, layers, theta)
        self.content_encoder = ContentEncoder(d_audio, d_model, heads, layers)
        self.content_decoder = ContentDecoder(d_model, heads, layers=2)
        self.emotion_encoder = EmotionEncoder(d_audio, d_model, heads, layers, theta)
        self.emotion_decoder = EmotionDecoder(d_model, heads, layers=2, theta_dim=theta)
        self.loaded = set()

    def modules_of(self, stage: str):
        return [getattr(self, name) for name in STAGE_MODULES[stage]]

    def freeze(self, stage: str):
        for module in self.modules_of(stage):
            module.eval()
            for p in module.parameters():
                p.requires_grad_(False)
        self.loaded.add(stage)

    def _require(self, *stages):
        for stage in stages:
            if stage not in self.loaded:
                raise InvariantError(f"missing frozen {stage} checkpoint")

    # -- inference helpers (numpy in, torch internally) -----------------------
    @staticmethod
    def _to_batch(audio) -> torch.Tensor:
        arr = np.asarray(audio.features if hasattr(audio, "features") else audio,
                         dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[None]
        return torch.from_numpy(arr)

    @torch.no_grad()
    def encode_identity(self, audio) -> IdentityOut:
        self.identity_encoder.eval()
        return self.identity_encoder(self._to_batch(audio))

    @torch.no_grad()
    def encode_content(self, audio) -> torch.Tensor:
        self._require("identity")
        self.content_encoder.eval()
        return self.content_encoder(self._to_batch(audio))

    @torch.no_grad()
    def decode_content(self, l_bar: torch.Tensor, alpha_hat: torch.Tensor) -> torch.Tensor:
        self._require("identity")
        self.content_decoder.eval()
        return self.content_decoder(l_bar, alpha_hat)

    @torch.no_grad()
    def encode_emotion(self, audio):
        self._require("identity", "content")
        self.emotion_encoder.eval()
        return self.emotion_encoder(self._to_batch(audio))

    @torch.no_grad()
    def decode_expression(self, theta_e, l_bar, alpha_hat) -> torch.Tensor:
        self._require("identity", "content")
        self.emotion_decoder.eval()
        return self.emotion_decoder(theta_e, l_bar, alpha_hat)
