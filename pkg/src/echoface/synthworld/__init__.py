"""Procedural stand-ins for every external asset.

A parametric toy face (shape/expression/pose coefficients), a
deterministic renderer, synthetic audio correlated with identity, content
and emotion, plus analytic or tiny-learned substitutes for matting,
inpainting and lip reading.
"""

from .types import AudioFeatures, FaceCoefficients, Frame, IdentitySpec, UtteranceSpec
from .world import sample_identity, synth_utterance
from .render import (
    FaceGeometry,
    analytic_silhouette,
    extract_mouth_crops,
    mouth_crops_from_coeffs,
    mouth_landmarks,
    mouth_mask,
    mouth_opening_pixels,
    render_background,
    render_mesh,
    render_textured,
)
from .inpaint import toy_inpaint
from .matting import Matting, train_matting
from .lipreader import LipReader, train_lip_reader
from .corpus import Corpus, CorpusSample, read_blob, write_blob

__all__ = [
    "AudioFeatures",
    "FaceCoefficients",
    "Frame",
    "IdentitySpec",
    "UtteranceSpec",
    "sample_identity",
    "synth_utterance",
    "FaceGeometry",
    "analytic_silhouette",
    "extract_mouth_crops",
    "mouth_crops_from_coeffs",
    "mouth_landmarks",
    "mouth_mask",
    "mouth_opening_pixels",
    "render_background",
    "render_mesh",
    "render_textured",
    "toy_inpaint",
    "Matting",
    "train_matting",
    "LipReader",
    "train_lip_reader",
    "Corpus",
    "CorpusSample",
    "read_blob",
    "write_blob",
]
