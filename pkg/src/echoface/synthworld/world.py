"""Identity sampling and paired audio/coefficient synthesis."""

import numpy as np

from ..seeding import rng
from .maps import maps_for
from .types import (
    APPEARANCE_DIM,
    MOUTH_DIM,
    AudioFeatures,
    FaceCoefficients,
    IdentitySpec,
    UtteranceSpec,
)

# Noise is clipped just under 1.5 sigma so two independent draws can never
# differ by more than 3 sigma in any entry, even after rounding.
NOISE_CLIP = 1.5 * (1.0 - 1e-9)

POSE_LIMITS = np.array([3.0, 3.0, 0.06])


def sample_identity(cfg, seed: int) -> IdentitySpec:
    """Draw a speaker deterministically from `seed`."""
    maps = maps_for(cfg)
    g = rng(cfg["world.map_seed"], "identity", seed)
    latent = g.standard_normal(cfg["world.id_latent_dim"])
    alpha = maps.alpha_basis @ latent
    age = float(g.uniform())
    gender = float(g.uniform())
    appearance = g.standard_normal(APPEARANCE_DIM)
    return IdentitySpec(
        id_label=int(seed),
        alpha=alpha,
        age=age,
        gender=gender,
        appearance=appearance,
    )


def _phoneme_track(maps, content_id: int, length: int) -> np.ndarray:
    t = np.arange(length)[:, None]
    return np.sin(maps.phoneme_freq[content_id][None, :] * t + maps.phoneme_phase[content_id][None, :])


def _emotion_track(maps, emotion_id: int, length: int) -> np.ndarray:
    t = np.arange(length)
    mod = 1.0 + 0.3 * np.sin(0.15 * t + maps.emotion_phase[emotion_id])
    return maps.emotion_sig[emotion_id][None, :] * mod[:, None]


def _pose_track(noise_seed: int, length: int) -> np.ndarray:
    g = rng(noise_seed, "pose")
    amp = g.uniform(0.2, 0.85, size=3) * POSE_LIMITS
    freq = g.uniform(0.05, 0.25, size=3)
    phase = g.uniform(0.0, 2 * np.pi, size=3)
    t = np.arange(length)[:, None]
    return amp[None, :] * np.sin(freq[None, :] * t + phase[None, :])


def synth_utterance(cfg, identity: IdentitySpec, utt: UtteranceSpec,
                    noise_seed: int) -> tuple[AudioFeatures, FaceCoefficients]:
    """Generate a paired (audio, coefficients) clip.

    Audio mixes an identity block, a phoneme track and an emotion track
    through the fixed world map, then adds clipped Gaussian noise. The
    mouth half of beta is a pure function of the phoneme track, the
    global half of the emotion label; appearance never touches audio.
    """
    if not 0 <= utt.content_id < cfg["world.n_contents"]:
        raise ValueError(f"unknown content id {utt.content_id}")
    if not 0 <= utt.emotion_id < cfg["world.n_emotions"]:
        raise ValueError(f"unknown emotion id {utt.emotion_id}")
    if utt.length > cfg["world.max_clip_len"]:
        raise ValueError(f"clip length {utt.length} exceeds configured max")

    maps = maps_for(cfg)
    length = utt.length

    phon = _phoneme_track(maps, utt.content_id, length)  # (L, 8)
    emo = _emotion_track(maps, utt.emotion_id, length)  # (L, 8)
    ident_block = maps.identity_mix @ np.concatenate(
        [identity.alpha, [identity.age, identity.gender]]
    )  # (16,)

    mixed = np.concatenate(
        [np.tile(ident_block, (length, 1)), phon, emo], axis=1
    )  # (L, 32)
    clean = mixed @ maps.audio_mix.T  # (L, d_audio)

    g = rng(noise_seed, "audio-noise")
    noise = np.clip(g.standard_normal(clean.shape), -NOISE_CLIP, NOISE_CLIP)
    audio = clean + cfg["world.noise_sigma"] * noise

    beta = np.zeros((length, 64))
    beta[:, :MOUTH_DIM] = phon @ maps.mouth_map.T
    beta[:, MOUTH_DIM:] = maps.emotion_global[utt.emotion_id][None, :]

    pose = _pose_track(noise_seed, length)

    meta = {
        "id_label": identity.id_label,
        "content_id": utt.content_id,
        "emotion_id": utt.emotion_id,
    }
    return (
        AudioFeatures(features=audio, sample_meta=meta),
        FaceCoefficients(alpha=identity.alpha.copy(), beta=beta, pose=pose),
    )
