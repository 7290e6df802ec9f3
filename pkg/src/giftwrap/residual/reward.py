"""Residual-control state and reward pieces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 7  # position error (2), tool velocity (2), planar force (2), prev f_desired


@dataclass
class RewardWeights:
    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 0.01

    def __post_init__(self) -> None:
        if not (self.alpha > self.beta > self.gamma > 0.0):
            raise ValueError(
                "reward weights must satisfy alpha > beta > gamma > 0, got "
                f"({self.alpha}, {self.beta}, {self.gamma})")


def build_state(position, velocity, wrench, f_desired_prev,
                waypoint_start) -> np.ndarray:
    """State layout: [dP (2), tool velocity (2), planar force (2), f^D_{t-1}],
    with dP the position error against the policy-proposed waypoint."""
    position = np.asarray(position, float)
    velocity = np.asarray(velocity, float)
    force = np.asarray(wrench, float)[:2]
    dp = position - np.asarray(waypoint_start, float)
    out = np.concatenate([dp, velocity, force, [float(f_desired_prev)]])
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite residual state")
    return out


def compute_reward(p_desired, p_actual, f_actual, f_desired, delta_f,
                   weights: RewardWeights) -> float:
    """Quadratic penalties on tracking error, force error and force change;
    always <= 0, zero only when all three vanish."""
    pe = np.linalg.norm(np.asarray(p_desired, float) - np.asarray(p_actual, float))
    fe = np.linalg.norm(np.asarray(f_actual, float) - np.asarray(f_desired, float))
    dfe = np.linalg.norm(np.asarray(delta_f, float))
    return float(-(weights.alpha * pe ** 2 + weights.beta * fe ** 2
                   + weights.gamma * dfe ** 2))
