"""Soft actor-critic over bounded residual corrections and admittance gains.

The actor is a squashed Gaussian mapped affinely into the command bounds;
critics are twin Q networks with target smoothing and automatic temperature
tuning toward a fixed entropy target.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn

from ..control import CommandLimits
from .reward import STATE_DIM

ACTION_DIM = 6  # delta_p (2), kp (2), kd (2)
LOG_STD_MIN, LOG_STD_MAX = -8.0, 2.0


@dataclass
class SACConfig:
    discount: float = 0.98
    tau: float = 0.01                 # target smoothing coefficient
    entropy_target: float = -float(ACTION_DIM)
    lr: float = 3e-4
    batch_size: int = 128
    buffer_capacity: int = 200_000
    hidden: int = 128
    start_steps: int = 500            # uniform exploration before the policy
    update_every: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if self.buffer_capacity <= 0 or self.batch_size <= 0:
            raise ValueError("capacities must be positive")


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM,
                 action_dim: int = ACTION_DIM):
        self.capacity = capacity
        self.state = np.zeros((capacity, state_dim), dtype=np.float32)
        self.action = np.zeros((capacity, action_dim), dtype=np.float32)
        self.reward = np.zeros(capacity, dtype=np.float32)
        self.next_state = np.zeros((capacity, state_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, s, a, r, s2, done) -> None:
        i = self._next
        self.state[i] = s
        self.action[i] = a
        self.reward[i] = r
        self.next_state[i] = s2
        self.done[i] = float(done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(0, self._size, size=batch_size)
        return {
            "state": torch.as_tensor(self.state[idx]),
            "action": torch.as_tensor(self.action[idx]),
            "reward": torch.as_tensor(self.reward[idx]),
            "next_state": torch.as_tensor(self.next_state[idx]),
            "done": torch.as_tensor(self.done[idx]),
        }


class ActionBounds:
    """Affine map between tanh-squashed outputs and command bounds."""

    def __init__(self, limits: CommandLimits):
        lo = np.array([-limits.residual_bound, -limits.residual_bound,
                       limits.kp_bounds[0], limits.kp_bounds[0],
                       limits.kd_bounds[0], limits.kd_bounds[0]])
        hi = np.array([limits.residual_bound, limits.residual_bound,
                       limits.kp_bounds[1], limits.kp_bounds[1],
                       limits.kd_bounds[1], limits.kd_bounds[1]])
        self.low = lo
        self.high = hi
        self.center = (lo + hi) / 2.0
        self.half = (hi - lo) / 2.0

    def to_env(self, squashed: np.ndarray) -> np.ndarray:
        return self.center + self.half * squashed

    def center_t(self, device=None) -> torch.Tensor:
        return torch.as_tensor(self.center, dtype=torch.float32)

    def half_t(self, device=None) -> torch.Tensor:
        return torch.as_tensor(self.half, dtype=torch.float32)


class Actor(nn.Module):
    def __init__(self, hidden: int, state_dim: int = STATE_DIM,
                 action_dim: int = ACTION_DIM):
        super().__init__()
        self.body = nn.Sequential(
            nn.Linear(state_dim, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU(),
        )
        self.mu = nn.Linear(hidden, action_dim)
        self.log_std = nn.Linear(hidden, action_dim)
        # zero-initialized heads: the pre-training deterministic action sits
        # at the bound-range midpoints
        nn.init.zeros_(self.mu.weight)
        nn.init.zeros_(self.mu.bias)
        nn.init.zeros_(self.log_std.weight)
        nn.init.constant_(self.log_std.bias, -1.0)

    def forward(self, state: torch.Tensor):
        h = self.body(state)
        mu = self.mu(h)
        log_std = torch.clamp(self.log_std(h), LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std

    def sample(self, state: torch.Tensor):
        mu, log_std = self(state)
        std = log_std.exp()
        eps = torch.randn_like(mu)
        pre = mu + std * eps
        squashed = torch.tanh(pre)
        logp = (-0.5 * ((pre - mu) / std) ** 2 - log_std
                - 0.5 * np.log(2 * np.pi)).sum(-1)
        logp = logp - torch.log(1 - squashed ** 2 + 1e-6).sum(-1)
        return squashed, logp, torch.tanh(mu)


class Critic(nn.Module):
    def __init__(self, hidden: int, state_dim: int = STATE_DIM,
                 action_dim: int = ACTION_DIM):
        super().__init__()
        self.q = nn.Sequential(
            nn.Linear(state_dim + action_dim, hidden), nn.ReLU(),
            nn.Linear(hidden, hidden), nn.ReLU(),
            nn.Linear(hidden, 1),
        )

    def forward(self, state, action):
        return self.q(torch.cat([state, action], dim=-1)).squeeze(-1)


class SACAgent:
    def __init__(self, config: SACConfig, limits: CommandLimits | None = None):
        self.cfg = config
        self.bounds = ActionBounds(limits or CommandLimits())
        torch.manual_seed(config.seed)
        self.rng = np.random.default_rng(config.seed)
        self.actor = Actor(config.hidden)
        self.q1 = Critic(config.hidden)
        self.q2 = Critic(config.hidden)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        self.opt_actor = torch.optim.Adam(self.actor.parameters(), lr=config.lr)
        self.opt_q = torch.optim.Adam(
            list(self.q1.parameters()) + list(self.q2.parameters()), lr=config.lr)
        self.log_alpha = torch.zeros(1, requires_grad=True)
        self.opt_alpha = torch.optim.Adam([self.log_alpha], lr=config.lr)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.total_updates = 0

    # ------------------------------------------------------------- interface

    def sample_action(self, state: np.ndarray, stochastic: bool = True) -> np.ndarray:
        """Bounded residual action (delta_p, kp, kd); the deterministic path
        returns the squashed mean."""
        s = torch.as_tensor(np.asarray(state, dtype=np.float32)).unsqueeze(0)
        with torch.no_grad():
            squashed, _, mean = self.actor.sample(s)
        out = squashed[0] if stochastic else mean[0]
        return self.bounds.to_env(out.numpy().astype(np.float64))

    def observe(self, s, a_env, r, s2, done) -> None:
        a = (np.asarray(a_env) - self.bounds.center) / self.bounds.half
        self.buffer.add(s, np.clip(a, -1.0, 1.0), r, s2, done)

    def update(self) -> dict:
        """One SAC gradient step on a replay batch; returns loss metrics."""
        cfg = self.cfg
        if len(self.buffer) < cfg.batch_size:
            return {}
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        alpha = self.log_alpha.exp().detach()

        with torch.no_grad():
            next_sq, next_logp, _ = self.actor.sample(batch["next_state"])
            qt = torch.minimum(self.q1_target(batch["next_state"], next_sq),
                               self.q2_target(batch["next_state"], next_sq))
            target = batch["reward"] + cfg.discount * (1 - batch["done"]) * (
                qt - alpha * next_logp)

        q1 = self.q1(batch["state"], batch["action"])
        q2 = self.q2(batch["state"], batch["action"])
        q_loss = ((q1 - target) ** 2).mean() + ((q2 - target) ** 2).mean()
        self.opt_q.zero_grad()
        q_loss.backward()
        self.opt_q.step()

        squashed, logp, _ = self.actor.sample(batch["state"])
        q_min = torch.minimum(self.q1(batch["state"], squashed),
                              self.q2(batch["state"], squashed))
        actor_loss = (alpha * logp - q_min).mean()
        self.opt_actor.zero_grad()
        actor_loss.backward()
        self.opt_actor.step()

        alpha_loss = -(self.log_alpha.exp()
                       * (logp.detach() + cfg.entropy_target)).mean()
        self.opt_alpha.zero_grad()
        alpha_loss.backward()
        self.opt_alpha.step()

        with torch.no_grad():
            for net, tgt in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
                for p, pt in zip(net.parameters(), tgt.parameters()):
                    pt.mul_(1 - cfg.tau).add_(cfg.tau * p)

        self.total_updates += 1
        metrics = {
            "q_loss": float(q_loss.detach()),
            "actor_loss": float(actor_loss.detach()),
            "alpha": float(self.log_alpha.exp().detach()),
            "q_mean": float(q1.mean().detach()),
        }
        if not all(np.isfinite(v) for v in metrics.values()):
            raise RuntimeError(f"non-finite SAC metrics: {metrics}")
        return metrics

    # ----------------------------------------------------------- persistence

    def save(self, path: str) -> None:
        torch.save({
            "config": self.cfg.__dict__,
            "actor": self.actor.state_dict(),
            "q1": self.q1.state_dict(),
            "q2": self.q2.state_dict(),
            "log_alpha": self.log_alpha.detach().numpy(),
            "bounds_low": self.bounds.low,
            "bounds_high": self.bounds.high,
            "total_updates": self.total_updates,
        }, path)

    @classmethod
    def load(cls, path: str, limits: CommandLimits | None = None) -> "SACAgent":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        agent = cls(SACConfig(**blob["config"]), limits)
        agent.actor.load_state_dict(blob["actor"])
        agent.q1.load_state_dict(blob["q1"])
        agent.q2.load_state_dict(blob["q2"])
        agent.q1_target = copy.deepcopy(agent.q1)
        agent.q2_target = copy.deepcopy(agent.q2)
        with torch.no_grad():
            agent.log_alpha.copy_(torch.as_tensor(blob["log_alpha"]))
        agent.total_updates = blob.get("total_updates", 0)
        return agent
