"""Fixed random linear maps that define the synthetic world.

Identity, phoneme and emotion factors are mixed into every audio channel
through a full-rank matrix, so nothing is recoverable by slicing — a
model has to actually unmix. All maps derive from `world.map_seed` only;
they are part of the world definition, not of any single sample.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..seeding import rng
from .types import ALPHA_DIM, BETA_DIM, MOUTH_DIM

K_IDENTITY = 16
K_PHONEME = 8
K_EMOTION = 8
MIX_DIM = K_IDENTITY + K_PHONEME + K_EMOTION


@dataclass(frozen=True)
class WorldMaps:
    alpha_basis: np.ndarray  # (80, id_latent_dim), orthonormal columns
    identity_mix: np.ndarray  # (16, 82): [alpha; age; gender] -> audio identity block
    phoneme_freq: np.ndarray  # (C, 8)
    phoneme_phase: np.ndarray  # (C, 8)
    mouth_map: np.ndarray  # (32, 8): phoneme features -> mouth coefficients
    emotion_global: np.ndarray  # (E, 32): emotion -> global expression, row 0 zero
    emotion_sig: np.ndarray  # (E, 8): emotion audio signature
    emotion_phase: np.ndarray  # (E,)
    audio_mix: np.ndarray  # (d_audio, 32)
    brow_dir: np.ndarray  # (32,) unit
    eye_dir: np.ndarray  # (32,) unit


@lru_cache(maxsize=8)
def world_maps(map_seed: int, d_audio: int, n_contents: int, n_emotions: int,
               id_latent_dim: int) -> WorldMaps:
    g = rng(map_seed, "world-maps")
    basis, _ = np.linalg.qr(g.standard_normal((ALPHA_DIM, id_latent_dim)))
    basis = basis * 2.2  # alpha entries end up with std ~0.85

    identity_mix = g.standard_normal((K_IDENTITY, ALPHA_DIM + 2)) / np.sqrt(ALPHA_DIM + 2)

    phoneme_freq = g.uniform(0.25, 1.15, size=(n_contents, K_PHONEME))
    phoneme_phase = g.uniform(0.0, 2 * np.pi, size=(n_contents, K_PHONEME))

    mouth_map = g.standard_normal((MOUTH_DIM, K_PHONEME)) * (0.9 / np.sqrt(K_PHONEME))
    mouth_map[:3] *= 2.0  # rows 0..2 drive the renderer; keep them lively

    emotion_global = g.standard_normal((n_emotions, BETA_DIM - MOUTH_DIM)) * 1.6
    emotion_global[0] = 0.0  # neutral is the reference style
    emotion_sig = g.standard_normal((n_emotions, K_EMOTION))
    emotion_phase = g.uniform(0.0, 2 * np.pi, size=n_emotions)

    audio_mix = g.standard_normal((d_audio, MIX_DIM)) / np.sqrt(MIX_DIM)

    brow_dir = g.standard_normal(BETA_DIM - MOUTH_DIM)
    brow_dir /= np.linalg.norm(brow_dir)
    eye_dir = g.standard_normal(BETA_DIM - MOUTH_DIM)
    eye_dir /= np.linalg.norm(eye_dir)

    return WorldMaps(
        alpha_basis=basis,
        identity_mix=identity_mix,
        phoneme_freq=phoneme_freq,
        phoneme_phase=phoneme_phase,
        mouth_map=mouth_map,
        emotion_global=emotion_global,
        emotion_sig=emotion_sig,
        emotion_phase=emotion_phase,
        audio_mix=audio_mix,
        brow_dir=brow_dir,
        eye_dir=eye_dir,
    )


def maps_for(cfg) -> WorldMaps:
    return world_maps(
        cfg["world.map_seed"],
        cfg["world.d_audio"],
        cfg["world.n_contents"],
        cfg["world.n_emotions"],
        cfg["world.id_latent_dim"],
    )
