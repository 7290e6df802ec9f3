"""Shared sub-task vocabulary for the wrapping task family.

Five reusable phases; ids are 1-based throughout (0 is reserved for "none").
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SubTaskID:
    id: int
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sub-task text must be nonempty")


SUBTASKS: dict[int, SubTaskID] = {
    1: SubTaskID(1, "push and crease the left side and its edge"),
    2: SubTaskID(2, "push and crease the right side and its edge"),
    3: SubTaskID(3, "fold the left overhang over the far edge"),
    4: SubTaskID(4, "fold the right overhang over the far edge"),
    5: SubTaskID(5, "close both sides and fixate the tails"),
}

SUBTASK_IDS = tuple(sorted(SUBTASKS))

# side-fold precedence: the overhang folds continue the side folds, and the
# closing phase always comes last
PREREQUISITES: dict[int, tuple[int, ...]] = {
    1: (),
    2: (),
    3: (1,),
    4: (2,),
    5: (1, 2, 3, 4),
}


def subtask(sid: int) -> SubTaskID:
    if sid not in SUBTASKS:
        raise KeyError(f"unknown sub-task id {sid}; vocabulary is {sorted(SUBTASKS)}")
    return SUBTASKS[sid]


def check_precedence(ids: list[int] | tuple[int, ...]) -> list[str]:
    """Return precedence violations for an ordered sub-task id sequence."""
    violations = []
    seen: set[int] = set()
    for sid in ids:
        if sid not in SUBTASKS:
            violations.append(f"unknown sub-task id {sid}")
            continue
        for pre in PREREQUISITES[sid]:
            if pre in ids and pre not in seen:
                violations.append(f"sub-task {sid} scheduled before its prerequisite {pre}")
        seen.add(sid)
    return violations
