"""Forward-noising schedule.

Signal coefficients a_t (the cumulative alpha-bar of DDPM, renamed to
avoid clashing with the face-shape symbol) are built from cosine betas
clipped at 0.999: a_0 is exactly 1, a_T is near zero but bounded safely
away from it, and the sequence is strictly decreasing.
"""

import math

import numpy as np
import torch


class NoiseSchedule:
    def __init__(self, t_train: int = 1000, kind: str = "cosine"):
        if t_train < 1:
            raise ValueError("t_train must be >= 1")
        self.t_train = t_train
        if kind == "cosine":
            s = 0.008
            steps = np.arange(t_train + 1, dtype=np.float64)
            f = np.cos((steps / t_train + s) / (1 + s) * math.pi / 2) ** 2
            ratio = np.clip(f[1:] / f[:-1], 1.0 - 0.999, 1.0)
        elif kind == "linear":
            betas = np.linspace(1e-4, 0.02, t_train)
            ratio = 1.0 - betas
        else:
            raise ValueError(f"unknown schedule kind {kind!r}")
        a = np.concatenate([[1.0], np.cumprod(ratio)])
        self.a = a  # (t_train + 1,), index by timestep

    def alpha_bar(self, t):
        return self.a[np.asarray(t)]

    def sqrt_terms(self, t):
        a = self.alpha_bar(t)
        return np.sqrt(a), np.sqrt(1.0 - a)


def q_sample(z0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """Noise z0 to timestep t: sqrt(a_t) z0 + sqrt(1 - a_t) eps.

    `t` may be a scalar or a per-sample array aligned with the batch dim.
    """
    sa, sn = schedule.sqrt_terms(t)
    sa = torch.as_tensor(sa, dtype=z0.dtype, device=z0.device)
    sn = torch.as_tensor(sn, dtype=z0.dtype, device=z0.device)
    if sa.ndim == 1:
        shape = (-1,) + (1,) * (z0.ndim - 1)
        sa, sn = sa.reshape(shape), sn.reshape(shape)
    return sa * z0 + sn * eps
