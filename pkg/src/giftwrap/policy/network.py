"""Sub-task-conditioned action-chunking transformer.

Multimodal inputs (privileged features or rendered views, proprioception,
wrench) are projected to tokens alongside a learned sub-task embedding; a
small encoder-decoder transformer emits a chunk of Cartesian actions plus a
per-step transition-flag logit. An optional style latent (CVAE) can be
enabled with latent_dim > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
import torch
import torch.nn as nn

from ..subtasks import SUBTASK_IDS
from .types import ACTION_DIM


@dataclass
class PolicyConfig:
    chunk_length: int = 20
    d_model: int = 64
    n_heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ffn_dim: int = 128
    latent_dim: int = 0            # style variable; 0 disables the CVAE path
    dropout: float = 0.0
    use_images: bool = False
    use_wrench: bool = True
    use_subtask: bool = True
    subtask_vocab: tuple[int, ...] = field(default_factory=lambda: tuple(SUBTASK_IDS))
    feature_dim: int = 45
    # loss weights
    w_recon: float = 1.0
    w_kl: float = 1.0
    w_flag: float = 1.0
    # optimization
    lr: float = 1e-3
    warmup_epochs: int = 5
    grad_clip: float = 1.0
    batch_size: int = 64
    epochs: int = 60
    seed: int = 0

    def __post_init__(self) -> None:
        if self.chunk_length < 1 or self.d_model < 8:
            raise ValueError("invalid policy sizes")


class ImageEncoder(nn.Module):
    """Small trainable conv stack over 64x64 renders; one token per view."""

    def __init__(self, d_model: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, 16, 5, stride=2, padding=2), nn.ReLU(),
            nn.Conv2d(16, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(32, 32, 3, stride=2, padding=1), nn.ReLU(),
            nn.AdaptiveAvgPool2d(4), nn.Flatten(),
            nn.Linear(32 * 16, d_model),
        )

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        # img: (B, V, H, W, 3) uint8-like floats in [0, 255]
        B, V = img.shape[:2]
        x = img.reshape(B * V, *img.shape[2:]).permute(0, 3, 1, 2) / 255.0
        tok = self.net(x)
        return tok.reshape(B, V, -1)


class StartPolicy(nn.Module):
    def __init__(self, cfg: PolicyConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.d_model
        self.subtask_table = nn.Embedding(max(cfg.subtask_vocab) + 1, d)
        self.state_proj = nn.Linear(4, d)
        self.wrench_proj = nn.Linear(6, d)
        if cfg.use_images:
            self.image_enc = ImageEncoder(d)
            n_obs_tokens = 2
        else:
            self.feature_proj = nn.Linear(cfg.feature_dim, d)
            n_obs_tokens = 1
        self.n_tokens = 1 + 1 + 1 + n_obs_tokens + (1 if cfg.latent_dim else 0)
        self.token_pos = nn.Parameter(torch.zeros(self.n_tokens, d))

        enc_layer = nn.TransformerEncoderLayer(
            d, cfg.n_heads, cfg.ffn_dim, cfg.dropout, batch_first=True,
            norm_first=True)
        self.encoder = nn.TransformerEncoder(enc_layer, cfg.enc_layers,
                                             enable_nested_tensor=False)
        dec_layer = nn.TransformerDecoderLayer(
            d, cfg.n_heads, cfg.ffn_dim, cfg.dropout, batch_first=True,
            norm_first=True)
        self.decoder = nn.TransformerDecoder(dec_layer, cfg.dec_layers)
        self.queries = nn.Parameter(torch.zeros(cfg.chunk_length, d))
        nn.init.normal_(self.queries, std=0.02)
        nn.init.normal_(self.token_pos, std=0.02)

        self.action_head = nn.Linear(d, ACTION_DIM)
        self.flag_head = nn.Linear(d, 1)

        if cfg.latent_dim:
            self.latent_proj = nn.Linear(cfg.latent_dim, d)
            # CVAE posterior over the target chunk
            post_layer = nn.TransformerEncoderLayer(
                d, cfg.n_heads, cfg.ffn_dim, cfg.dropout, batch_first=True,
                norm_first=True)
            self.posterior = nn.TransformerEncoder(post_layer, 1,
                                                   enable_nested_tensor=False)
            self.action_embed = nn.Linear(ACTION_DIM, d)
            self.post_token = nn.Parameter(torch.zeros(1, d))
            self.post_head = nn.Linear(d, 2 * cfg.latent_dim)

    def _tokens(self, batch: dict, latent: torch.Tensor | None) -> torch.Tensor:
        cfg = self.cfg
        toks = []
        sub = batch["subtask"]
        if not cfg.use_subtask:
            sub = torch.zeros_like(sub)
        toks.append(self.subtask_table(sub))
        toks.append(self.state_proj(batch["robot_state"]))
        wr = batch["wrench"]
        if not cfg.use_wrench:
            wr = torch.zeros_like(wr)
        toks.append(self.wrench_proj(wr))
        if cfg.use_images:
            img_tokens = self.image_enc(batch["images"])
            toks.extend(img_tokens.unbind(dim=1))
        else:
            toks.append(self.feature_proj(batch["features"]))
        if cfg.latent_dim:
            z = latent if latent is not None else torch.zeros(
                sub.shape[0], cfg.latent_dim, dtype=toks[0].dtype,
                device=toks[0].device)
            toks.append(self.latent_proj(z))
        tokens = torch.stack(toks, dim=1)
        return tokens + self.token_pos[: tokens.shape[1]]

    def posterior_latent(self, batch: dict) -> tuple[torch.Tensor, torch.Tensor]:
        emb = self.action_embed(batch["actions"])
        tok = torch.cat([self.post_token.expand(emb.shape[0], 1, -1), emb], dim=1)
        enc = self.posterior(tok)[:, 0]
        stats = self.post_head(enc)
        mu, logvar = stats.chunk(2, dim=-1)
        return mu, logvar

    def forward(self, batch: dict, latent: torch.Tensor | None = None
                ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (actions (B, chunk, ACTION_DIM), flag logits (B, chunk))."""
        tokens = self._tokens(batch, latent)
        memory = self.encoder(tokens)
        q = self.queries.unsqueeze(0).expand(tokens.shape[0], -1, -1)
        dec = self.decoder(q, memory)
        return self.action_head(dec), self.flag_head(dec).squeeze(-1)


def il_loss(pred_actions: torch.Tensor, flag_logits: torch.Tensor,
            target_actions: torch.Tensor, target_flags: torch.Tensor,
            mask: torch.Tensor, cfg: PolicyConfig,
            kl: torch.Tensor | None = None) -> tuple[torch.Tensor, dict]:
    """Masked L1 reconstruction + transition-flag BCE (+ optional KL)."""
    if pred_actions.shape != target_actions.shape:
        raise ValueError("prediction/target length mismatch")
    m = mask.unsqueeze(-1).to(pred_actions.dtype)
    denom = m.sum().clamp_min(1.0)
    recon = (torch.abs(pred_actions - target_actions) * m).sum() \
        / (denom * pred_actions.shape[-1])
    bce = nn.functional.binary_cross_entropy_with_logits(
        flag_logits, target_flags, reduction="none")
    flag = (bce * mask.to(bce.dtype)).sum() / denom
    total = cfg.w_recon * recon + cfg.w_flag * flag
    parts = {"recon": float(recon.detach()), "flag": float(flag.detach())}
    if kl is not None:
        total = total + cfg.w_kl * kl
        parts["kl"] = float(kl.detach())
    return total, parts


def kl_divergence(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    return (-0.5 * (1 + logvar - mu.pow(2) - logvar.exp())).sum(-1).mean()
