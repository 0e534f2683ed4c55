"""Sequential stage training for the disentangler."""

from pathlib import Path

import numpy as np
import torch

from ..ckpt import (
    blocks_checksum,
    load_checkpoint,
    load_module_blocks,
    module_blocks,
    save_checkpoint,
)
from ..errors import ConfigError, InvariantError
from ..seeding import rng, seed_torch
from ..synthworld.render import mouth_crops_from_coeffs
from .losses import loss_content, loss_emotion, loss_identity
from .models import STAGE_MODULES, PadStack

STAGES = ("identity", "content", "emotion")


def pad_checkpoint_path(workdir, stage: str) -> Path:
    return Path(workdir) / f"pad_{stage}.ckpt"


def build_stack(cfg, seed: int) -> PadStack:
    seed_torch(seed, "pad-init")
    return PadStack(cfg)


def stage_blocks(stack: PadStack, stage: str) -> dict:
    blocks = {}
    for name in STAGE_MODULES[stage]:
        module = getattr(stack, name)
        for key, arr in module_blocks(module).items():
            blocks[f"{name}.{key}"] = arr
    return blocks


def load_stage(stack: PadStack, stage: str, path, expect_hash: str | None = None) -> str:
    ckpt_stage, _, blocks = load_checkpoint(path, expect_hash)
    if ckpt_stage != stage:
        raise InvariantError(f"checkpoint at {path} holds stage {ckpt_stage!r}, wanted {stage!r}")
    for name in STAGE_MODULES[stage]:
        load_module_blocks(getattr(stack, name), blocks, prefix=f"{name}.")
    stack.freeze(stage)
    return blocks_checksum(blocks)


def load_pad_stack(cfg, workdir, stages=STAGES, seed: int = 0) -> PadStack:
    """Build a stack and load+freeze the given stage checkpoints."""
    stack = build_stack(cfg, seed)
    for stage in stages:
        load_stage(stack, stage, pad_checkpoint_path(workdir, stage), cfg.hash())
    return stack


def _stack_batch(samples, indices) -> torch.Tensor:
    return torch.from_numpy(np.stack([samples[i].audio.features for i in indices]))


def _train_identity(cfg, stack, corpus, seed, log):
    samples = corpus.train_samples
    by_id = {}
    for i, s in enumerate(samples):
        by_id.setdefault(s.identity.id_label, []).append(i)
    multi = [ids for ids in by_id.values() if len(ids) >= 2]
    if len(multi) < 2:
        raise ConfigError("identity stage needs >= 2 identities with >= 2 clips each")

    enc = stack.identity_encoder
    enc.train()
    opt = torch.optim.AdamW(enc.parameters(), lr=cfg["pad.lr"], weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=cfg["pad.steps_identity"], eta_min=0.1 * cfg["pad.lr"])
    g = rng(seed, "pad-identity")
    tau = cfg["pad.tau"]
    batch = cfg["pad.batch"]
    for _ in range(cfg["pad.steps_identity"]):
        anchor_idx, pos_idx, neg_idx, alphas = [], [], [], []
        for _ in range(batch):
            gi = int(g.integers(len(multi)))
            clips = multi[gi]
            a, p = g.choice(len(clips), size=2, replace=False)
            other = multi[(gi + 1 + int(g.integers(len(multi) - 1))) % len(multi)]
            anchor_idx.append(clips[a])
            pos_idx.append(clips[p])
            neg_idx.append(other[int(g.integers(len(other)))])
            alphas.append(samples[clips[a]].coeffs.alpha)
        out_a = enc(_stack_batch(samples, anchor_idx))
        out_p = enc(_stack_batch(samples, pos_idx))
        out_n = enc(_stack_batch(samples, neg_idx))
        alpha_gt = torch.from_numpy(np.stack(alphas))
        loss = loss_identity(out_a.alpha_hat, alpha_gt, out_a.theta_id,
                             out_p.theta_id, out_n.theta_id, tau)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        log.append(loss.detach().item())
    enc.eval()


def _train_content(cfg, stack, corpus, seed, log, lip_expert):
    if lip_expert is None:
        raise ConfigError("content stage requires the frozen lip-reading expert")
    samples = corpus.train_samples
    enc, dec = stack.content_encoder, stack.content_decoder
    enc.train(), dec.train()
    params = list(enc.parameters()) + list(dec.parameters())
    opt = torch.optim.AdamW(params, lr=cfg["pad.lr"], weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=cfg["pad.steps_content"], eta_min=0.1 * cfg["pad.lr"])
    g = rng(seed, "pad-content")
    lam = cfg["pad.lambda_reg"]
    batch = cfg["pad.batch"]
    for _ in range(cfg["pad.steps_content"]):
        idx = g.integers(len(samples), size=batch)
        audio = _stack_batch(samples, idx)
        beta = torch.from_numpy(np.stack([samples[i].coeffs.beta for i in idx]))
        labels = torch.tensor([samples[i].utterance.content_id for i in idx])
        with torch.no_grad():
            alpha_hat = stack.identity_encoder(audio).alpha_hat
        l = dec(enc(audio), alpha_hat)
        crops = mouth_crops_from_coeffs(l[..., :32])
        loss = loss_content(l, beta, crops, labels, lip_expert, lam)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        log.append(loss.detach().item())
    enc.eval(), dec.eval()


def _train_emotion(cfg, stack, corpus, seed, log):
    samples = corpus.train_samples
    by_emotion = {}
    for i, s in enumerate(samples):
        by_emotion.setdefault(s.utterance.emotion_id, []).append(i)
    emotions = [e for e, ids in by_emotion.items() if len(ids) >= 2]
    if len(emotions) < 2:
        raise ConfigError("emotion stage needs >= 2 emotions with >= 2 clips each")

    enc, dec = stack.emotion_encoder, stack.emotion_decoder
    enc.train(), dec.train()
    params = list(enc.parameters()) + list(dec.parameters())
    opt = torch.optim.AdamW(params, lr=cfg["pad.lr"], weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=cfg["pad.steps_emotion"], eta_min=0.1 * cfg["pad.lr"])
    g = rng(seed, "pad-emotion")
    tau = cfg["pad.tau"]
    batch = cfg["pad.batch"]
    for _ in range(cfg["pad.steps_emotion"]):
        anchor_idx, pos_idx, neg_idx = [], [], []
        for _ in range(batch):
            e = emotions[int(g.integers(len(emotions)))]
            clips = by_emotion[e]
            a, p = g.choice(len(clips), size=2, replace=False)
            other_e = emotions[(emotions.index(e) + 1 + int(g.integers(len(emotions) - 1))) % len(emotions)]
            anchor_idx.append(clips[a])
            pos_idx.append(clips[p])
            neg_idx.append(by_emotion[other_e][int(g.integers(len(by_emotion[other_e])))])
        audio = _stack_batch(samples, anchor_idx)
        beta = torch.from_numpy(np.stack([samples[i].coeffs.beta for i in anchor_idx]))
        with torch.no_grad():
            alpha_hat = stack.identity_encoder(audio).alpha_hat
            l_bar = stack.content_encoder(audio)
        theta_e, _ = enc(audio)
        theta_pos, _ = enc(_stack_batch(samples, pos_idx))
        theta_neg, _ = enc(_stack_batch(samples, neg_idx))
        beta_hat = dec(theta_e, l_bar, alpha_hat)
        loss = loss_emotion(beta_hat, beta, theta_e, theta_pos, theta_neg, tau)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        log.append(loss.detach().item())
    enc.eval(), dec.eval()


def train_stage(cfg, stage: str, corpus, seed: int, workdir, registry=None,
                lip_expert=None) -> Path:
    """Train one disentanglement stage; earlier stages stay bit-frozen.

    Returns the checkpoint path. A loss-curve log lands next to it.
    """
    if stage not in STAGES:
        raise ConfigError(f"unknown PAD stage {stage!r}")
    if registry is not None:
        registry.check_order(stage, cfg.hash())

    stack = build_stack(cfg, seed)
    prior = STAGES[: STAGES.index(stage)]
    prior_checksums = {}
    for p in prior:
        prior_checksums[p] = load_stage(stack, p, pad_checkpoint_path(workdir, p), cfg.hash())

    log = []
    if stage == "identity":
        _train_identity(cfg, stack, corpus, seed, log)
    elif stage == "content":
        _train_content(cfg, stack, corpus, seed, log, lip_expert)
    else:
        _train_emotion(cfg, stack, corpus, seed, log)

    for p in prior:
        if blocks_checksum(stage_blocks(stack, p)) != prior_checksums[p]:
            raise InvariantError(f"frozen stage {p!r} changed during {stage!r} training")

    path = pad_checkpoint_path(workdir, stage)
    blocks = stage_blocks(stack, stage)
    save_checkpoint(path, stage, cfg.hash(), blocks)
    Path(f"{path}.loss.txt").write_text("\n".join(f"{v!r}" for v in log) + "\n")
    if registry is not None:
        registry.record(stage, path, cfg.hash(), blocks_checksum(blocks))
    return path
