"""Scenario layouts: box placement, crease schedule, and canonical resets.

The chain is laid on the table with the box resting on its middle span. Each
side flap wraps the box cross-section in four 90-degree creases: up the near
side, across the top, down the far side, and outward onto the table. The five
sub-tasks group those creases:

    1: left flap, near creases    (bottom-left edge, top-left edge)
    2: right flap, near creases   (bottom-right edge, top-right edge)
    3: left flap, far creases     (its far top corner, its tail-to-table fold)
    4: right flap, far creases
    5: close both sides: press the tails flat and fixate them

Hinge angles are signed turns in increasing-joint-index order; walking that
way both flaps turn +90 deg at every crease except the outward tail fold,
which turns -90 deg. Crease hinges land exactly on the discretization grid
when box depth and height are integer multiples of segment_length (true for
the default 103 x 0.01 m chain); otherwise they snap to the nearest hinge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig

HALF_PI = np.pi / 2.0


@dataclass(frozen=True)
class Crease:
    hinge: int           # hinge index = joint index of the fold line
    turn: float          # target signed turn angle, radians
    stage: int           # sub-task that creates this crease


@dataclass(frozen=True)
class ScenarioLayout:
    j_left: int                        # joint at the bottom-left box edge
    j_right: int                       # joint at the bottom-right box edge
    box_x0: float
    box_x1: float
    box_y0: float                      # box bottom (rests on the paper)
    box_y1: float
    pinned_joints: np.ndarray          # interior joints trapped under the box
    creases: tuple[Crease, ...]        # full wrap schedule, all five stages
    fixate_joints: dict[int, tuple[int, ...]] = field(default_factory=dict)

    def creases_for_stage(self, stage: int) -> tuple[Crease, ...]:
        return tuple(c for c in self.creases if c.stage == stage)

    def creases_completed(self, stages) -> tuple[Crease, ...]:
        done = set(stages)
        return tuple(c for c in self.creases if c.stage in done)

    def crease_hinges(self) -> np.ndarray:
        return np.array(sorted(c.hinge for c in self.creases), dtype=int)


def build_layout(config: SimConfig) -> ScenarioLayout:
    n = config.segment_count
    ds = config.segment_length
    width = config.box_dims[1]
    height = config.box_dims[2]
    t = config.paper_thickness

    w_seg = max(2, round(width / ds))
    h_seg = max(1, round(height / ds))

    j_left = (n - w_seg) // 2
    j_right = j_left + w_seg
    if j_left - 2 * h_seg - w_seg < 1 or j_right + 2 * h_seg + w_seg > n - 1:
        raise ValueError("paper too short to wrap the configured box cross-section")

    creases = (
        Crease(j_left, HALF_PI, 1),                      # bottom-left edge
        Crease(j_left - h_seg, HALF_PI, 1),              # top-left edge
        Crease(j_right, HALF_PI, 2),                     # bottom-right edge
        Crease(j_right + h_seg, HALF_PI, 2),             # top-right edge
        Crease(j_left - h_seg - w_seg, HALF_PI, 3),      # left flap far top corner
        Crease(j_left - 2 * h_seg - w_seg, -HALF_PI, 3),  # left flap tail fold
        Crease(j_right + h_seg + w_seg, HALF_PI, 4),     # right flap far top corner
        Crease(j_right + 2 * h_seg + w_seg, -HALF_PI, 4),  # right flap tail fold
    )

    # the box weight traps the paper through its whole footprint, edge joints
    # included: the edge joints become the fold vertices
    pinned = np.arange(j_left, j_right + 1)

    # tape anchors: each side fold tapes the flap tip region to the box top;
    # the overhang folds peel that tape, fold, and re-tape the tail on the
    # table; closing tapes the chain ends
    fixate = {
        1: (2,),
        2: (n - 2,),
        3: (2,),
        4: (n - 2,),
        5: (0, n),
    }
    return ScenarioLayout(
        j_left=j_left, j_right=j_right,
        box_x0=-width / 2.0, box_x1=width / 2.0,
        box_y0=t, box_y1=t + height,
        pinned_joints=pinned, creases=creases, fixate_joints=fixate,
    )


def flat_positions(config: SimConfig, layout: ScenarioLayout) -> np.ndarray:
    """Joint positions of the unfolded chain resting on the table."""
    n = config.segment_count
    ds = config.segment_length
    xs = (np.arange(n + 1) - layout.j_left) * ds + layout.box_x0
    ys = np.full(n + 1, config.paper_thickness / 2.0)
    return np.stack([xs, ys], axis=1)


def _rot(v: np.ndarray, ang: float) -> np.ndarray:
    c, s = np.cos(ang), np.sin(ang)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def folded_positions(config: SimConfig, layout: ScenarioLayout, stages) -> np.ndarray:
    """Ideal chain polyline with the creases of the given completed stages
    applied (an int means that stage and everything before it).

    Turtle walk outward from the under-box span, turning by each completed
    crease's target angle; panels stay straight. Walking tipward on the left
    flap reverses the chain direction, so hinge turns flip sign there.
    """
    if isinstance(stages, (int, np.integer)):
        stages = set(range(1, int(stages) + 1))
    pos = flat_positions(config, layout)
    done = {c.hinge: c.turn for c in layout.creases_completed(stages)}
    n = config.segment_count
    ds = config.segment_length

    heading = np.array([-1.0, 0.0])
    p = pos[layout.j_left].copy()
    for j in range(layout.j_left, 0, -1):
        if j in done:
            heading = _rot(heading, -done[j])
        p = p + heading * ds
        pos[j - 1] = p

    heading = np.array([1.0, 0.0])
    p = pos[layout.j_right].copy()
    for j in range(layout.j_right, n):
        if j in done:
            heading = _rot(heading, done[j])
        p = p + heading * ds
        pos[j + 1] = p
    return pos


SCENARIO_NAMES = ("full", "subtask-1", "subtask-2", "subtask-3", "subtask-4", "subtask-5")


def parse_scenario(scenario) -> int:
    """Map a scenario identifier to the first pending stage (full -> 1)."""
    if isinstance(scenario, (int, np.integer)):
        stage = int(scenario)
    elif isinstance(scenario, str):
        name = scenario.strip().lower().replace("_", "-")
        if name == "full":
            stage = 1
        elif name.startswith("subtask-"):
            try:
                stage = int(name.rsplit("-", 1)[-1])
            except ValueError:
                raise KeyError(f"unknown scenario {scenario!r}; expected one of {SCENARIO_NAMES}")
        else:
            raise KeyError(f"unknown scenario {scenario!r}; expected one of {SCENARIO_NAMES}")
    else:
        raise KeyError(f"unknown scenario {scenario!r}")
    if stage not in (1, 2, 3, 4, 5):
        raise KeyError(f"scenario stage out of range: {scenario!r}")
    return stage
