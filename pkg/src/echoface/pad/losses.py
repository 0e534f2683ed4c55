"""Stage losses: reconstruction norms plus pairwise InfoNCE.

The contrastive term is the pairwise form

    -log[ exp(S(pos)/tau) / (exp(S(pos)/tau) + exp(S(neg)/tau)) ]
      =  softplus((S(neg) - S(pos)) / tau)

with S cosine similarity. tau=1 recovers the plain form used in the
closed-form checks; training uses the configured temperature.
"""

import torch
import torch.nn.functional as F

from ..synthworld.lipreader import expert_loss


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    na = torch.linalg.vector_norm(a, dim=-1)
    nb = torch.linalg.vector_norm(b, dim=-1)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("cosine similarity undefined for zero-norm embedding")
    return (a * b).sum(dim=-1) / (na * nb)


def infonce(anchor: torch.Tensor, positive: torch.Tensor, negative: torch.Tensor,
            tau: float = 1.0) -> torch.Tensor:
    s_pos = cosine_similarity(anchor, positive)
    s_neg = cosine_similarity(anchor, negative)
    return F.softplus((s_neg - s_pos) / tau).mean()


def _seq_norm(delta: torch.Tensor, sample_ndim: int) -> torch.Tensor:
    """Euclidean norm over each sample's entries, averaged over the batch."""
    if delta.ndim == sample_ndim:
        delta = delta[None]
    return torch.linalg.vector_norm(delta.reshape(delta.shape[0], -1), dim=-1).mean()


def loss_identity(alpha_hat, alpha, theta_id, theta_pos, theta_neg, tau: float = 1.0):
    rec = _seq_norm(alpha - alpha_hat, sample_ndim=1)
    return rec + infonce(theta_id, theta_pos, theta_neg, tau)


def loss_content(l, beta, rendered_mouth_seq, labels, expert, lambda_reg: float = 0.1):
    """Weighted coefficient regularizer plus lip-reading cross-entropy.

    `rendered_mouth_seq` are the (differentiable) mouth crops rendered
    from l; `labels` the content classes; `expert` the frozen lip reader.
    """
    n_classes = expert.n_contents
    if (labels < 0).any() or (labels >= n_classes).any():
        raise ValueError("content label out of vocabulary")
    reg = _seq_norm(l - beta, sample_ndim=2)
    return lambda_reg * reg + expert_loss(expert, rendered_mouth_seq, labels)


def loss_emotion(beta_hat, beta, theta_e, theta_pos, theta_neg, tau: float = 1.0):
    rec = _seq_norm(beta_hat - beta, sample_ndim=2)
    return rec + infonce(theta_e, theta_pos, theta_neg, tau)
