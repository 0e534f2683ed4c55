"""Prompt vocabulary and the small text encoder stand-in.

The vocabulary is a fixed word list: quality words for the base prompt
plus identity/emotion descriptors used in backbone-training captions.
The encoder runs over token *embeddings*, so learned pseudo tokens can
be appended before encoding.
"""

import torch
import torch.nn as nn

EMOTION_WORDS = ["neutral", "happy", "sad", "angry", "surprised", "fearful",
                 "disgusted", "calm"]

VOCAB = [
    "a", "high", "quality", "face", "photo", "portrait", "of", "person",
    "young", "old", "female", "male",
    *EMOTION_WORDS,
]
_WORD_TO_ID = {w: i for i, w in enumerate(VOCAB)}


def tokenize(text: str) -> list[int]:
    ids = []
    for word in text.lower().split():
        if word not in _WORD_TO_ID:
            raise ValueError(f"unknown vocabulary word {word!r}")
        ids.append(_WORD_TO_ID[word])
    return ids


def caption_for_labels(age: float, gender: float, emotion_id: int) -> str:
    age_word = "young" if age < 0.5 else "old"
    gender_word = "male" if gender >= 0.5 else "female"
    return f"a high quality face photo {age_word} {gender_word} {EMOTION_WORDS[emotion_id]}"


class TextEncoder(nn.Module):
    def __init__(self, d_txt: int = 128, layers: int = 2, heads: int = 4,
                 max_len: int = 16):
        super().__init__()
        from ..pad.models import sinusoidal_pe  # same position-code recipe

        self.d_txt = d_txt
        self.max_len = max_len
        self.table = nn.Embedding(len(VOCAB), d_txt)
        layer = nn.TransformerEncoderLayer(
            d_model=d_txt, nhead=heads, dim_feedforward=2 * d_txt,
            dropout=0.0, activation="gelu", batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers)
        self._pe = sinusoidal_pe

    def embed_ids(self, ids: list[int]) -> torch.Tensor:
        return self.table(torch.tensor(ids, dtype=torch.long))

    def forward(self, token_embeddings: torch.Tensor) -> torch.Tensor:
        """token_embeddings: (B, S, d_txt) or (S, d_txt) -> same-shape Y."""
        single = token_embeddings.ndim == 2
        if single:
            token_embeddings = token_embeddings[None]
        s = token_embeddings.shape[1]
        if s > self.max_len:
            raise ValueError(f"prompt of {s} tokens exceeds max length {self.max_len}")
        pe = self._pe(s, self.d_txt, token_embeddings.dtype).to(token_embeddings.device)
        y = self.encoder(token_embeddings + pe[None])
        return y[0] if single else y
