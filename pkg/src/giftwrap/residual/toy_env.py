"""1-DoF spring-wall environment with a known analytic optimum.

An overdamped point presses against a wall of stiffness k_wall; the base
controller commands a fixed waypoint inside the wall. The agent's residual
offset and gains set the steady-state contact force, so perfect force
tracking (f = f_desired) is achievable within the bounds: the environment
serves as the efficacy oracle for the residual learner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..control import CommandLimits
from .reward import RewardWeights, build_state, compute_reward


@dataclass
class SpringWallConfig:
    wall_x: float = 0.0
    wall_stiffness: float = 400.0     # N/m
    drag: float = 60.0                # N.s/m
    base_waypoint: float = 0.012      # m, commanded depth past the wall
    f_desired: float = 3.0            # N
    dt: float = 0.025
    episode_ticks: int = 120
    start_spread: float = 0.01


class SpringWallEnv:
    """Planar-compatible wrapper: x is the active axis, y is inert."""

    def __init__(self, config: SpringWallConfig | None = None,
                 limits: CommandLimits | None = None, seed: int = 0):
        self.cfg = config or SpringWallConfig()
        self.limits = limits or CommandLimits()
        self.rng = np.random.default_rng(seed)
        self.x = 0.0
        self.v = 0.0
        self.f_prev = 0.0
        self.f_desired_prev = self.cfg.f_desired
        self.ticks = 0

    def contact_force(self, x: float) -> float:
        return self.cfg.wall_stiffness * max(x - self.cfg.wall_x, 0.0)

    def reset(self) -> np.ndarray:
        self.x = self.cfg.wall_x - abs(self.rng.uniform(0, self.cfg.start_spread))
        self.v = 0.0
        self.f_prev = self.contact_force(self.x)
        self.f_desired_prev = self.cfg.f_desired
        self.ticks = 0
        return self._state()

    def _state(self) -> np.ndarray:
        return build_state([self.x, 0.0], [self.v, 0.0],
                           [self.contact_force(self.x), 0.0, 0.0],
                           self.f_desired_prev,
                           [self.cfg.base_waypoint, 0.0])

    def step(self, action: np.ndarray, weights: RewardWeights | None = None):
        """action = (delta_p x, delta_p y, kp x, kp y, kd x, kd y)."""
        cfg = self.cfg
        weights = weights or RewardWeights()
        dpx = float(np.clip(action[0], -self.limits.residual_bound,
                            self.limits.residual_bound))
        kp = float(np.clip(action[2], *self.limits.kp_bounds))
        kd = float(np.clip(action[4], *self.limits.kd_bounds))
        p_des = cfg.base_waypoint + dpx
        # overdamped plant at a few substeps per control tick
        sub = 5
        h = cfg.dt / sub
        for _ in range(sub):
            f_cmd = np.clip(kp * (p_des - self.x) + kd * (0.0 - self.v),
                            -self.limits.max_force, self.limits.max_force)
            f_contact = self.contact_force(self.x)
            self.v = (f_cmd - f_contact) / cfg.drag
            self.x += self.v * h
        f = self.contact_force(self.x)
        reward = compute_reward([p_des, 0.0], [self.x, 0.0], [f, 0.0],
                                [cfg.f_desired, 0.0], [f - self.f_prev, 0.0],
                                weights)
        self.f_prev = f
        self.f_desired_prev = cfg.f_desired
        self.ticks += 1
        done = self.ticks >= cfg.episode_ticks
        return self._state(), reward, done, {"force": f,
                                             "f_desired": cfg.f_desired}
