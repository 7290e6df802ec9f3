"""Residual-agent training: generic over environments exposing
reset()/step(action) (the spring-wall toy) and over policy-driven sub-task
rollouts on the paper simulator."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .reward import RewardWeights
from .sac import SACAgent, SACConfig


@dataclass
class ForceCurve:
    episode: int
    mean_force_error: float
    mean_reward: float


def train_on_env(env, agent: SACAgent, total_steps: int,
                 weights: RewardWeights | None = None,
                 log=None) -> list[ForceCurve]:
    """Online SAC on a gym-like env; returns per-episode force curves."""
    weights = weights or RewardWeights()
    curves: list[ForceCurve] = []
    state = env.reset()
    ep_ferr, ep_rew, ep_len, episode = [], [], 0, 0
    for step in range(total_steps):
        if step < agent.cfg.start_steps:
            action = agent.bounds.to_env(
                agent.rng.uniform(-1, 1, size=len(agent.bounds.low)))
        else:
            action = agent.sample_action(state, stochastic=True)
        nxt, reward, done, info = env.step(action, weights)
        agent.observe(state, action, reward, nxt, done)
        if step % agent.cfg.update_every == 0:
            agent.update()
        ep_ferr.append(abs(info["force"] - info["f_desired"]))
        ep_rew.append(reward)
        ep_len += 1
        state = nxt
        if done:
            curves.append(ForceCurve(episode, float(np.mean(ep_ferr)),
                                     float(np.mean(ep_rew))))
            if log and episode % 10 == 0:
                log(f"episode {episode}: mean |f - fD| = {curves[-1].mean_force_error:.3f} N")
            episode += 1
            ep_ferr, ep_rew, ep_len = [], [], 0
            state = env.reset()
    return curves


class _TrainingAdapter:
    """Lets the executor drive exploration and feed the replay buffer."""

    def __init__(self, agent: SACAgent):
        self.agent = agent

    def sample_action(self, state, stochastic=True):
        return self.agent.sample_action(state, stochastic=True)

    def transition(self, s, a, r, s2, done):
        self.agent.observe(s, a, r, s2, done)
        self.agent.update()


def train_residual(executor_factory, stages, episodes: int,
                   config: SACConfig | None = None,
                   force_profiles: dict[int, np.ndarray] | None = None,
                   expected_ticks: dict[int, int] | None = None,
                   weights: RewardWeights | None = None,
                   curves_path: str | None = None,
                   log=None) -> tuple[SACAgent, list[ForceCurve]]:
    """Train the residual agent inside policy-driven sub-task rollouts.

    executor_factory() must return a fresh (executor, reset_state_fn) pair;
    stages cycle per episode.
    """
    agent = SACAgent(config or SACConfig())
    adapter = _TrainingAdapter(agent)
    curves: list[ForceCurve] = []
    for ep in range(episodes):
        stage = stages[ep % len(stages)]
        executor, reset_fn = executor_factory()
        state = reset_fn(stage)
        prof = (force_profiles or {}).get(stage)
        exp_ticks = (expected_ticks or {}).get(stage)
        result = executor.run(state, stage, agent=adapter, agent_stochastic=True,
                              force_profile=prof, expected_ticks=exp_ticks,
                              reward_weights=weights)
        curves.append(ForceCurve(ep, result.mean_force_error, 0.0))
        if log:
            log(f"episode {ep} stage {stage}: ticks {result.ticks} "
                f"mean |f - fD| {result.mean_force_error:.3f} N "
                f"peak {result.peak_force:.2f} N")
    if curves_path:
        os.makedirs(os.path.dirname(curves_path) or ".", exist_ok=True)
        with open(curves_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["episode", "mean_force_error", "mean_reward"])
            for c in curves:
                writer.writerow([c.episode, f"{c.mean_force_error:.6f}",
                                 f"{c.mean_reward:.6f}"])
    return agent, curves
