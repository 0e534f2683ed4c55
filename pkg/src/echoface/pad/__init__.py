"""Progressive audio disentanglement: identity -> content -> emotion."""

from .models import (
    ContentDecoder,
    ContentEncoder,
    EmotionDecoder,
    EmotionEncoder,
    IdentityEncoder,
    IdentityOut,
    PadStack,
)
from .losses import cosine_similarity, infonce, loss_content, loss_emotion, loss_identity
from .training import pad_checkpoint_path, train_stage

__all__ = [
    "ContentDecoder",
    "ContentEncoder",
    "EmotionDecoder",
    "EmotionEncoder",
    "IdentityEncoder",
    "IdentityOut",
    "PadStack",
    "cosine_similarity",
    "infonce",
    "loss_content",
    "loss_emotion",
    "loss_identity",
    "pad_checkpoint_path",
    "train_stage",
]
