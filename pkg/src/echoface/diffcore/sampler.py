"""Deterministic DDIM sampling over a uniform timestep subset."""

import numpy as np
import torch


def ddim_steps(t_train: int, n_steps: int) -> np.ndarray:
    """Strictly decreasing timestep sequence from t_train down to 0."""
    if n_steps < 1:
        raise ValueError("need at least one sampling step")
    if n_steps > t_train:
        raise ValueError("cannot take more steps than the training schedule has")
    ts = np.linspace(t_train, 0, n_steps + 1)
    ts = np.unique(np.round(ts).astype(int))[::-1]
    return ts


@torch.no_grad()
def ddim_sample(eps_fn, z_t: torch.Tensor, n_steps: int, schedule,
                eta: float = 0.0, noise_gen=None) -> torch.Tensor:
    """Run the sampler from pure noise (or any z at t_train) down to z_0.

    eps_fn(z, t) predicts the noise; with eta=0 the trajectory is a
    deterministic function of its inputs.
    """
    ts = ddim_steps(schedule.t_train, n_steps)
    z = z_t
    for t, t_next in zip(ts[:-1], ts[1:]):
        sa_t, sn_t = schedule.sqrt_terms(int(t))
        sa_n, sn_n = schedule.sqrt_terms(int(t_next))
        eps = eps_fn(z, int(t))
        x0 = (z - sn_t * eps) / sa_t
        if eta > 0.0:
            sigma = eta * np.sqrt((1 - schedule.alpha_bar(int(t_next)))
                                  / (1 - schedule.alpha_bar(int(t)))) * np.sqrt(
                1 - schedule.alpha_bar(int(t)) / schedule.alpha_bar(int(t_next)))
            dir_coeff = np.sqrt(max(sn_n**2 - sigma**2, 0.0))
            noise = torch.randn(z.shape, generator=noise_gen, dtype=z.dtype)
            z = sa_n * x0 + dir_coeff * eps + sigma * noise
        else:
            z = sa_n * x0 + sn_n * eps
    return z
