"""echoface: diverse talking-face generation driven by audio alone.

The pipeline has two halves. "Listening" extracts identity, content and
emotion cues from an audio feature sequence through three sequentially
trained stages. "Imagining" feeds those cues into a small frozen latent
diffusion backbone through three trainable adapters and rolls frames out
autoregressively: the first frame is free to pick a new appearance, every
later frame is anchored to it.

Everything external (datasets, pretrained experts, matting, inpainting)
is replaced by a procedural synthetic world (`echoface.synthworld`) so the
whole system trains and evaluates on one desktop CPU.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
