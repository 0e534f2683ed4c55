"""Image autoencoder with per-scale feature taps and a decoder blend hook.

64x64x3 frames compress to a 4x8x8 latent (stride 8). The encoder
exposes its per-resolution features so the blending adapter can pull
background features; the decoder accepts a hook that may rewrite its
features at chosen resolutions before the output head runs.
"""

import torch
import torch.nn as nn


def _gn(ch):
    return nn.GroupNorm(min(8, ch), ch)


class ResBlock(nn.Module):
    def __init__(self, ch):
        super().__init__()
        self.norm1 = _gn(ch)
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm2 = _gn(ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x):
        h = self.conv1(self.act(self.norm1(x)))
        h = self.conv2(self.act(self.norm2(h)))
        return x + h


class VaeEncoder(nn.Module):
    def __init__(self, base: int = 32, z_channels: int = 4):
        super().__init__()
        b = base
        self.conv_in = nn.Conv2d(3, b, 3, padding=1)  # tap @64
        self.down1 = nn.Conv2d(b, 2 * b, 3, stride=2, padding=1)
        self.res1 = ResBlock(2 * b)  # tap @32
        self.down2 = nn.Conv2d(2 * b, 3 * b, 3, stride=2, padding=1)
        self.res2 = ResBlock(3 * b)  # tap @16
        self.down3 = nn.Conv2d(3 * b, 4 * b, 3, stride=2, padding=1)
        self.res3 = ResBlock(4 * b)
        self.norm_out = _gn(4 * b)
        self.conv_out = nn.Conv2d(4 * b, 2 * z_channels, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x, want_features: bool = False):
        f64 = self.conv_in(x)
        f32 = self.res1(self.down1(self.act(f64)))
        f16 = self.res2(self.down2(self.act(f32)))
        h = self.res3(self.down3(self.act(f16)))
        mu, logvar = self.conv_out(self.act(self.norm_out(h))).chunk(2, dim=1)
        if want_features:
            return mu, logvar, {64: f64, 32: f32, 16: f16}
        return mu, logvar


class VaeDecoder(nn.Module):
    # resolutions (relative to a 64px frame) where the blend hook may fire
    HOOK_LEVELS = (16, 32, 64)

    def __init__(self, base: int = 32, z_channels: int = 4):
        super().__init__()
        b = base
        self.conv_in = nn.Conv2d(z_channels, 4 * b, 3, padding=1)
        self.res_in = ResBlock(4 * b)
        self.up1 = nn.Conv2d(4 * b, 3 * b, 3, padding=1)
        self.res1 = ResBlock(3 * b)  # @16
        self.up2 = nn.Conv2d(3 * b, 2 * b, 3, padding=1)
        self.res2 = ResBlock(2 * b)  # @32
        self.up3 = nn.Conv2d(2 * b, b, 3, padding=1)
        self.res3 = ResBlock(b)  # @64, the highest-resolution decoder layer
        self.norm_out = _gn(b)
        self.conv_out = nn.Conv2d(b, 3, 3, padding=1)
        self.act = nn.SiLU()
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")

    def forward(self, z, blend_hook=None):
        h = self.res_in(self.conv_in(z))
        h = self.res1(self.up1(self.upsample(self.act(h))))
        if blend_hook is not None:
            h = blend_hook(16, h)
        h = self.res2(self.up2(self.upsample(self.act(h))))
        if blend_hook is not None:
            h = blend_hook(32, h)
        h = self.res3(self.up3(self.upsample(self.act(h))))
        if blend_hook is not None:
            h = blend_hook(64, h)
        return self.conv_out(self.act(self.norm_out(h)))


class ConvVAE(nn.Module):
    """Channel widths per tap resolution: {64: b, 32: 2b, 16: 3b}."""

    def __init__(self, base: int = 32, z_channels: int = 4):
        super().__init__()
        self.base = base
        self.z_channels = z_channels
        self.encoder = VaeEncoder(base, z_channels)
        self.decoder = VaeDecoder(base, z_channels)

    def feature_channels(self) -> dict:
        b = self.base
        return {64: b, 32: 2 * b, 16: 3 * b}

    def encode(self, x):
        return self.encoder(x)

    def encoder_features(self, x) -> dict:
        _, _, feats = self.encoder(x, want_features=True)
        return feats

    def decode(self, z, blend_hook=None):
        return self.decoder(z, blend_hook)
