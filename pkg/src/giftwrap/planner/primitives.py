"""Closed primitive vocabulary with typed argument schemas.

Twelve primitives compose every executable plan; schemas are versioned so
serialized plans can be validated against the vocabulary they were compiled
for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SCHEMA_VERSION = 1

# name -> {arg: type}; all listed args are required
PRIMITIVE_SCHEMAS: dict[str, dict[str, type]] = {
    "move_to": {"target": str, "speed": float},
    "open_gripper": {"width": float},
    "close_gripper": {"width": float},
    "push_fold": {"subtask": int, "crease": str},
    "crease_surface": {"surface": str, "force": float},
    "crease_edge": {"corner": str, "force": float},
    "fixate": {"joint": int, "label": str},
    "release": {"joint": int},
    "retreat": {"target": str},
    "wait_for_human": {"timeout_s": float, "action": str},
    "announce": {"message": str},
    "home": {},
}

PRIMITIVE_NAMES = tuple(PRIMITIVE_SCHEMAS)

# primitives whose motion comes from the learned policy during execution;
# the rest are environment/bookkeeping actions the harness performs itself
LEARNED_MOTION = {"move_to", "open_gripper", "close_gripper", "push_fold",
                  "crease_surface", "crease_edge", "retreat"}
ENV_SIDE = {"fixate", "release", "wait_for_human", "announce", "home"}


@dataclass
class PrimitiveCall:
    name: str
    args: dict = field(default_factory=dict)

    def validate(self) -> list[str]:
        problems = []
        schema = PRIMITIVE_SCHEMAS.get(self.name)
        if schema is None:
            return [f"unknown primitive {self.name!r}"]
        for arg, typ in schema.items():
            if arg not in self.args:
                problems.append(f"{self.name}: missing argument {arg!r}")
            elif not isinstance(self.args[arg], typ):
                problems.append(
                    f"{self.name}: argument {arg!r} expected {typ.__name__}, "
                    f"got {type(self.args[arg]).__name__}")
        for arg in self.args:
            if arg not in schema:
                problems.append(f"{self.name}: unexpected argument {arg!r}")
        return problems
