"""Observation/action containers shared by the policy stack."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.core import WrenchReading
from ..subtasks import SubTaskID
from .rotation import matrix_from_rot6d, rot6d_from_matrix

ACTION_DIM = 10  # position (3) + 6D rotation + gripper


@dataclass
class Observation:
    robot_state: np.ndarray                  # (4,) x, y, yaw, aperture
    wrench: np.ndarray                       # (6,)
    subtask: SubTaskID
    features: np.ndarray | None = None       # privileged vector
    images: tuple[np.ndarray, ...] | None = None  # rendered views


@dataclass
class Action:
    position: np.ndarray      # (3,) meters; planar stack uses x, y
    rotation6d: np.ndarray    # (6,)
    gripper: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.rotation6d, [self.gripper]])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "Action":
        v = np.asarray(v, dtype=float).reshape(ACTION_DIM)
        return cls(position=v[:3].copy(), rotation6d=v[3:9].copy(),
                   gripper=float(v[9]))

    def rotation_matrix(self) -> np.ndarray:
        return matrix_from_rot6d(self.rotation6d)

    @classmethod
    def from_pose(cls, position, rotation: np.ndarray, gripper: float) -> "Action":
        p = np.zeros(3)
        p[:len(position)] = position
        return cls(position=p, rotation6d=rot6d_from_matrix(rotation),
                   gripper=float(gripper))


@dataclass
class ActionChunk:
    actions: np.ndarray           # (chunk, ACTION_DIM)
    transition_prob: np.ndarray   # (chunk,)
    start_tick: int = 0           # tick of the first action

    def __post_init__(self) -> None:
        self.actions = np.asarray(self.actions, dtype=float)
        self.transition_prob = np.asarray(self.transition_prob, dtype=float)
        if self.actions.shape[0] != self.transition_prob.shape[0]:
            raise ValueError("chunk length mismatch between actions and flags")

    @property
    def length(self) -> int:
        return self.actions.shape[0]
