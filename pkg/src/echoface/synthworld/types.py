"""Core value types of the synthetic world."""

from dataclasses import dataclass, field

import numpy as np

ALPHA_DIM = 80
BETA_DIM = 64
MOUTH_DIM = 32  # beta[:32] is mouth-local, beta[32:] is global expression
POSE_DIM = 3
APPEARANCE_DIM = 16

FRAME_KINDS = ("rendered_mesh", "textured", "background", "mask", "generated")


@dataclass(frozen=True)
class IdentitySpec:
    """A speaker: geometry plus semantic attributes plus appearance.

    `appearance` holds texture/hue/hair parameters that audio can never
    reveal; it must not influence synthesized audio.
    """

    id_label: int
    alpha: np.ndarray  # (80,)
    age: float
    gender: float
    appearance: np.ndarray  # (16,)

    def __post_init__(self):
        assert self.alpha.shape == (ALPHA_DIM,) and np.all(np.isfinite(self.alpha))
        assert 0.0 <= self.age <= 1.0 and 0.0 <= self.gender <= 1.0
        assert self.appearance.shape == (APPEARANCE_DIM,)


@dataclass(frozen=True)
class UtteranceSpec:
    """What is said (content class), how (emotion class), and for how long."""

    content_id: int
    emotion_id: int
    length: int

    def __post_init__(self):
        assert self.length >= 2, "clips must span at least two frames"


@dataclass
class FaceCoefficients:
    """Toy 3DMM state: per-clip shape, per-frame expression and pose."""

    alpha: np.ndarray  # (80,)
    beta: np.ndarray  # (L, 64)
    pose: np.ndarray  # (L, 3)

    @property
    def length(self) -> int:
        return self.beta.shape[0]

    def mouth_only(self) -> "FaceCoefficients":
        """Copy with the global-expression half zeroed."""
        beta = self.beta.copy()
        beta[:, MOUTH_DIM:] = 0.0
        return FaceCoefficients(self.alpha.copy(), beta, self.pose.copy())


@dataclass
class AudioFeatures:
    """Mel/MFCC-style feature sequence; the network's only input."""

    features: np.ndarray  # (L, d_audio)
    sample_meta: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.features.shape[0]


@dataclass
class Frame:
    """An image (or mask) plus the geometry used to render it, if any.

    `geometry` is (alpha, beta_t, pose_t) for procedurally rendered
    frames; generated frames carry None and go through the learned
    matting path instead of the analytic one.
    """

    pixels: np.ndarray  # (H, W, 3) in [0,1], or (H, W) for masks
    kind: str
    geometry: tuple | None = None

    def __post_init__(self):
        assert self.kind in FRAME_KINDS, f"unknown frame kind {self.kind!r}"

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def gray(self) -> np.ndarray:
        if self.pixels.ndim == 2:
            return self.pixels
        return self.pixels.mean(axis=2)
