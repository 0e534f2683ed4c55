"""Counter-based seed fan-out.

One root seed controls the whole pipeline. Every consumer asks for a
child seed by name; children are independent hash-derived streams, so
adding a consumer never shifts the seeds of existing ones.
"""

import hashlib

import numpy as np
import torch


def derive_seed(root_seed: int, *labels) -> int:
    """Derive a 63-bit child seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def rng(root_seed: int, *labels) -> np.random.Generator:
    """NumPy generator for the given label path."""
    return np.random.default_rng(derive_seed(root_seed, *labels))


def torch_generator(root_seed: int, *labels) -> torch.Generator:
    """Torch generator for the given label path."""
    gen = torch.Generator()
    gen.manual_seed(derive_seed(root_seed, *labels))
    return gen


def seed_torch(root_seed: int, *labels) -> None:
    """Seed torch's global RNG (used for module init) from the fan-out."""
    torch.manual_seed(derive_seed(root_seed, *labels))
