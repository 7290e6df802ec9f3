"""Imitation training loop: cosine schedule with warmup, gradient clipping,
per-sub-task reconstruction metrics, CSV logging."""

from __future__ import annotations

import csv
import math
import os

import numpy as np
import torch

from ..demos.dataset import WindowDataset
from .network import PolicyConfig, StartPolicy, il_loss, kl_divergence
from .runtime import NormStats, PolicyRuntime, save_checkpoint


def _batches(ds: WindowDataset, stats: NormStats, batch_size: int,
             rng: np.random.Generator, use_images: bool):
    order = rng.permutation(len(ds))
    for lo in range(0, len(order), batch_size):
        idx = order[lo:lo + batch_size]
        samples = [ds.sample(int(i)) for i in idx]
        batch = {
            "robot_state": torch.tensor(
                np.stack([s["robot_state"] for s in samples]), dtype=torch.float32),
            "wrench": torch.tensor(
                np.stack([s["wrench"] for s in samples]) / stats.wrench_scale,
                dtype=torch.float32),
            "subtask": torch.tensor([s["subtask"] for s in samples],
                                    dtype=torch.long),
            "actions": torch.tensor(
                (np.stack([s["actions"] for s in samples]) - stats.action_mean)
                / stats.action_std, dtype=torch.float32),
            "transition": torch.tensor(
                np.stack([s["transition"] for s in samples]), dtype=torch.float32),
            "mask": torch.tensor(np.stack([s["mask"] for s in samples])),
        }
        if use_images:
            batch["images"] = torch.tensor(
                np.stack([s["images"] for s in samples]), dtype=torch.float32)
        else:
            batch["features"] = torch.tensor(
                (np.stack([s["features"] for s in samples]) - stats.feature_mean)
                / stats.feature_std, dtype=torch.float32)
        yield batch


def _lr_at(epoch: int, cfg: PolicyConfig) -> float:
    if epoch < cfg.warmup_epochs:
        return cfg.lr * (epoch + 1) / max(1, cfg.warmup_epochs)
    t = (epoch - cfg.warmup_epochs) / max(1, cfg.epochs - cfg.warmup_epochs)
    return cfg.lr * 0.5 * (1.0 + math.cos(math.pi * min(t, 1.0)))


def train(dataset: WindowDataset, cfg: PolicyConfig,
          checkpoint_path: str | None = None,
          metrics_path: str | None = None,
          log=None) -> tuple[PolicyRuntime, list[dict]]:
    """Train a policy on demonstration windows.

    Raises ValueError on an empty dataset and RuntimeError if the loss goes
    non-finite.
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    stats = NormStats.from_dataset(dataset)
    model = StartPolicy(cfg)
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=1e-4)

    history: list[dict] = []
    for epoch in range(cfg.epochs):
        lr = _lr_at(epoch, cfg)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        agg = {"loss": 0.0, "recon": 0.0, "flag": 0.0, "kl": 0.0}
        count = 0
        per_subtask: dict[int, list[float]] = {}
        for batch in _batches(dataset, stats, cfg.batch_size, rng, cfg.use_images):
            latent = None
            kl = None
            if cfg.latent_dim:
                mu, logvar = model.posterior_latent(batch)
                latent = mu + torch.randn_like(mu) * torch.exp(0.5 * logvar)
                kl = kl_divergence(mu, logvar)
            pred, logits = model(batch, latent)
            loss, parts = il_loss(pred, logits, batch["actions"],
                                  batch["transition"], batch["mask"], cfg, kl)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}: {parts}")
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            opt.step()
            agg["loss"] += float(loss.detach())
            for k, v in parts.items():
                agg[k] = agg.get(k, 0.0) + v
            count += 1
            with torch.no_grad():
                err = torch.abs(pred - batch["actions"]).mean(dim=(1, 2))
                for sid, e in zip(batch["subtask"].tolist(), err.tolist()):
                    per_subtask.setdefault(int(sid), []).append(e)
        row = {"epoch": epoch, "lr": lr}
        row.update({k: v / max(count, 1) for k, v in agg.items()})
        for sid in sorted(per_subtask):
            row[f"recon_sub{sid}"] = float(np.mean(per_subtask[sid]))
        history.append(row)
        if log and (epoch % max(1, cfg.epochs // 10) == 0 or epoch == cfg.epochs - 1):
            log(f"epoch {epoch:3d} lr {lr:.2e} loss {row['loss']:.4f} "
                f"recon {row['recon']:.4f} flag {row['flag']:.4f}")

    runtime = PolicyRuntime(model, stats)
    if checkpoint_path:
        os.makedirs(os.path.dirname(checkpoint_path) or ".", exist_ok=True)
        save_checkpoint(checkpoint_path, model, stats,
                        metrics={"final_loss": history[-1]["loss"]})
    if metrics_path:
        os.makedirs(os.path.dirname(metrics_path) or ".", exist_ok=True)
        keys = sorted({k for row in history for k in row})
        with open(metrics_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            writer.writerows(history)
    return runtime, history
