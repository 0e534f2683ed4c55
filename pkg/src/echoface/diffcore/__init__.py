"""Tiny latent diffusion backbone, trained once and then frozen."""

from .schedule import NoiseSchedule, q_sample
from .sampler import ddim_sample
from .text import VOCAB, TextEncoder, caption_for_labels, tokenize
from .vae import ConvVAE
from .unet import Denoiser
from .backbone import Backbone, backbone_checkpoint_path, load_backbone, sample_images, train_backbone

__all__ = [
    "NoiseSchedule",
    "q_sample",
    "ddim_sample",
    "VOCAB",
    "TextEncoder",
    "caption_for_labels",
    "tokenize",
    "ConvVAE",
    "Denoiser",
    "Backbone",
    "backbone_checkpoint_path",
    "load_backbone",
    "sample_images",
    "train_backbone",
]
