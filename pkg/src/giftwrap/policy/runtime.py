"""Inference wrapper, temporal ensembling and transition detection."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from ..subtasks import SUBTASKS, SubTaskID
from .network import PolicyConfig, StartPolicy
from .rotation import average_rot6d
from .types import ACTION_DIM, Action, ActionChunk, Observation


@dataclass
class NormStats:
    action_mean: np.ndarray
    action_std: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    wrench_scale: float = 10.0

    @classmethod
    def from_dataset(cls, ds) -> "NormStats":
        acts = np.concatenate(ds.actions, axis=0)
        feats = np.concatenate(ds.features, axis=0)
        return cls(
            action_mean=acts.mean(axis=0),
            action_std=np.maximum(acts.std(axis=0), 1e-4),
            feature_mean=feats.mean(axis=0),
            feature_std=np.maximum(feats.std(axis=0), 1e-4),
        )

    def to_dict(self) -> dict:
        return {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(action_mean=np.array(d["action_mean"]),
                   action_std=np.array(d["action_std"]),
                   feature_mean=np.array(d["feature_mean"]),
                   feature_std=np.array(d["feature_std"]),
                   wrench_scale=d.get("wrench_scale", 10.0))


class PolicyRuntime:
    """Evaluation-mode policy: observation in, de-normalized chunk out."""

    def __init__(self, model: StartPolicy, stats: NormStats,
                 vocab: dict[int, str] | None = None):
        self.model = model.eval()
        self.cfg = model.cfg
        self.stats = stats
        self.vocab = vocab or {k: v.text for k, v in SUBTASKS.items()}

    @torch.no_grad()
    def predict_chunk(self, obs: Observation, start_tick: int = 0) -> ActionChunk:
        if self.cfg.use_subtask and obs.subtask.id not in self.vocab:
            raise KeyError(f"sub-task {obs.subtask.id} not in policy vocabulary")
        batch = self.encode_observation(obs)
        actions, logits = self.model(batch)
        acts = actions[0].double().numpy() * self.stats.action_std + self.stats.action_mean
        probs = torch.sigmoid(logits[0]).double().numpy()
        return ActionChunk(actions=acts, transition_prob=probs,
                           start_tick=start_tick)

    def encode_observation(self, obs: Observation) -> dict:
        if obs.features is None and not self.cfg.use_images:
            raise ValueError("privileged features required by this policy")
        t = lambda a: torch.as_tensor(np.asarray(a), dtype=torch.float32).unsqueeze(0)
        batch = {
            "robot_state": t(obs.robot_state),
            "wrench": t(obs.wrench / self.stats.wrench_scale),
            "subtask": torch.tensor([obs.subtask.id], dtype=torch.long),
        }
        if self.cfg.use_images:
            batch["images"] = t(np.stack(obs.images).astype(np.float32))
        else:
            feats = (obs.features - self.stats.feature_mean) / self.stats.feature_std
            batch["features"] = t(feats)
        return batch


def embed_subtask(policy: StartPolicy, subtask: SubTaskID | int,
                  encoder=None) -> np.ndarray:
    """Sub-task conditioning vector: learned-table lookup by id, or a
    pluggable text encoder applied to the description."""
    if encoder is not None:
        text = subtask.text if isinstance(subtask, SubTaskID) else SUBTASKS[subtask].text
        if not text.strip():
            raise ValueError("sub-task text must be nonempty for encoder mode")
        return np.asarray(encoder(text), dtype=np.float64)
    sid = subtask.id if isinstance(subtask, SubTaskID) else int(subtask)
    if sid not in policy.cfg.subtask_vocab:
        raise KeyError(f"sub-task id {sid} not in the learned table")
    with torch.no_grad():
        vec = policy.subtask_table(torch.tensor([sid]))
    return vec[0].double().numpy()


class TemporalEnsemble:
    """Overlapping-chunk action blending with exponential age decay."""

    def __init__(self, decay: float = 0.25):
        if not 0.0 < decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        self.decay = decay
        self.chunks: list[ActionChunk] = []

    def reset(self) -> None:
        self.chunks = []

    def add(self, chunk: ActionChunk) -> None:
        self.chunks.append(chunk)

    def action_at(self, tick: int) -> tuple[Action, float]:
        """Weighted average of all pending predictions for this tick; the
        rotation averages in 6D and re-orthonormalizes."""
        preds = []
        weights = []
        for ch in self.chunks:
            k = tick - ch.start_tick
            if 0 <= k < ch.length:
                age = tick - ch.start_tick
                preds.append((ch.actions[k], ch.transition_prob[k]))
                weights.append(self.decay ** age)
        if not preds:
            raise LookupError(f"no pending chunk covers tick {tick}")
        w = np.asarray(weights)
        w = w / w.sum()
        acts = np.stack([p[0] for p in preds])
        flags = np.array([p[1] for p in preds])
        mean = (acts * w[:, None]).sum(axis=0)
        rot = average_rot6d(acts[:, 3:9], w)
        vec = np.concatenate([mean[:3], rot, [mean[9]]])
        self.chunks = [c for c in self.chunks if tick < c.start_tick + c.length]
        return Action.from_vector(vec), float((flags * w).sum())


class TransitionDetector:
    """Debounced thresholding of the transition-flag probability."""

    def __init__(self, threshold: float = 0.5, consecutive: int = 3):
        self.threshold = threshold
        self.consecutive = consecutive
        self._run = 0

    def reset(self) -> None:
        self._run = 0

    def update(self, prob: float) -> bool:
        if not 0.0 <= prob <= 1.0:
            raise ValueError("flag probability outside [0, 1]")
        if prob >= self.threshold:
            self._run += 1
        else:
            self._run = 0
        return self._run >= self.consecutive


def detect_transition(probs, threshold: float = 0.5, consecutive: int = 3) -> bool:
    """True iff the tail of probs holds `consecutive` values >= threshold."""
    det = TransitionDetector(threshold, consecutive)
    fired = False
    for p in probs:
        fired = det.update(float(p))
    return fired


def save_checkpoint(path: str, model: StartPolicy, stats: NormStats,
                    metrics: dict | None = None) -> None:
    torch.save({
        "config": asdict(model.cfg),
        "state_dict": model.state_dict(),
        "stats": stats.to_dict(),
        "vocab": {int(k): v.text for k, v in SUBTASKS.items()},
        "metrics": metrics or {},
    }, path)


def load_checkpoint(path: str) -> PolicyRuntime:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    cfg_kwargs = dict(blob["config"])
    cfg_kwargs["subtask_vocab"] = tuple(cfg_kwargs.get("subtask_vocab", ()))
    cfg = PolicyConfig(**cfg_kwargs)
    model = StartPolicy(cfg)
    model.load_state_dict(blob["state_dict"])
    stats = NormStats.from_dict(blob["stats"])
    vocab = {int(k): v for k, v in blob.get("vocab", {}).items()}
    return PolicyRuntime(model, stats, vocab)
