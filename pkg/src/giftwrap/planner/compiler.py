"""Plan compilation and validation: bind grammar steps to typed primitive
calls using a waypoint library derived from the scenario geometry."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ..sim.config import SimConfig
from ..sim.scenario import build_layout, flat_positions
from ..subtasks import SUBTASK_IDS, check_precedence
from .grammar import PlanStep, SubTaskSequence
from .primitives import PRIMITIVE_SCHEMAS, PrimitiveCall


class PlanCompileError(ValueError):
    pass


@dataclass
class ExecutablePlan:
    steps: list[PrimitiveCall]
    subtask_markers: dict[int, int]      # step index -> sub-task id
    subtask_ids: list[int]
    provenance: str = "grammar"
    instruction_hash: str = ""

    def subtask_of_step(self, index: int) -> int:
        marker = 0
        for i in sorted(self.subtask_markers):
            if i <= index:
                marker = self.subtask_markers[i]
        return marker


def waypoint_library(config: SimConfig | None = None) -> dict[str, np.ndarray]:
    """Named poses per sub-task derived from the scenario layout."""
    config = config or SimConfig()
    lay = build_layout(config)
    flat = flat_positions(config, lay)
    n = config.segment_count
    lib = {
        "left_flap_approach": flat[0] + [0.0, 0.05],
        "right_flap_approach": flat[n] + [0.0, 0.05],
        "left_overhang_approach": np.array([lay.box_x1 + 0.08, lay.box_y1 + 0.06]),
        "right_overhang_approach": np.array([lay.box_x0 - 0.08, lay.box_y1 + 0.06]),
        "rest": np.array([0.0, 0.30]),
        "home": np.array(config.home_pose[:2]),
    }
    return lib


def compile_plan(steps: list[PlanStep], subtask_ids: SubTaskSequence,
                 config: SimConfig | None = None,
                 provenance: str = "grammar",
                 instruction_text: str = "") -> ExecutablePlan:
    """Bind every step to one typed primitive call; raises PlanCompileError
    on unbindable steps or unknown waypoints."""
    config = config or SimConfig()
    layout = build_layout(config)
    lib = waypoint_library(config)
    n = config.segment_count

    calls: list[PrimitiveCall] = []
    markers: dict[int, int] = {}
    current = None
    for k, step in enumerate(steps):
        if step.primitive_hint is None:
            raise PlanCompileError(f"step {k} ({step.description!r}) has no "
                                   "primitive binding")
        if step.primitive_hint not in PRIMITIVE_SCHEMAS:
            raise PlanCompileError(f"step {k}: unknown primitive "
                                   f"{step.primitive_hint!r}")
        args = dict(step.args)
        if step.primitive_hint in ("move_to", "retreat"):
            target = args.get("target")
            if target not in lib:
                raise PlanCompileError(
                    f"step {k} ({step.description!r}): unknown pose {target!r}")
        if step.primitive_hint == "fixate":
            label = str(args.get("label", ""))
            if label == "left_tip":
                args["joint"] = 0
            elif label == "right_tip":
                args["joint"] = n
            elif args.get("joint", -1) < 0:
                args["joint"] = int(layout.fixate_joints[step.subtask][0])
        if step.primitive_hint == "release" and args.get("joint", -1) < 0:
            peeled_stage = step.subtask - 2 if step.subtask in (3, 4) else step.subtask
            args["joint"] = int(layout.fixate_joints[peeled_stage][0])
        call = PrimitiveCall(step.primitive_hint, args)
        problems = call.validate()
        if problems:
            raise PlanCompileError(f"step {k}: " + "; ".join(problems))
        calls.append(call)
        if step.subtask is not None and step.subtask != current:
            markers[len(calls) - 1] = step.subtask
            current = step.subtask

    digest = hashlib.sha256(instruction_text.encode()).hexdigest()[:16]
    plan = ExecutablePlan(steps=calls, subtask_markers=markers,
                          subtask_ids=list(subtask_ids.ids),
                          provenance=provenance, instruction_hash=digest)
    problems = validate_plan(plan)
    if problems:
        raise PlanCompileError("compiled plan failed validation: "
                               + "; ".join(problems))
    return plan


def validate_plan(plan: ExecutablePlan,
                  policy_vocab: tuple[int, ...] | None = None) -> list[str]:
    """Schema conformance, precedence safety and policy coverage; returns the
    list of violations (empty = ok)."""
    problems: list[str] = []
    for k, call in enumerate(plan.steps):
        for p in call.validate():
            problems.append(f"step {k}: {p}")
    marker_ids = [plan.subtask_markers[i] for i in sorted(plan.subtask_markers)]
    for sid in marker_ids:
        if sid not in plan.subtask_ids:
            problems.append(f"marker sub-task {sid} missing from the id sequence")
    problems.extend(check_precedence(marker_ids))
    for sid in plan.subtask_ids:
        if sid not in SUBTASK_IDS:
            problems.append(f"unknown sub-task id {sid}")
    if policy_vocab is not None:
        for sid in marker_ids:
            if sid not in policy_vocab:
                problems.append(
                    f"sub-task {sid} has no trained policy coverage")
    return problems


def serialize_plan(plan: ExecutablePlan) -> str:
    lines = [f"plan v1 backend={plan.provenance} hash={plan.instruction_hash}",
             "subtasks: " + " ".join(str(s) for s in plan.subtask_ids)]
    for k, call in enumerate(plan.steps):
        marker = f" [sub {plan.subtask_markers[k]}]" if k in plan.subtask_markers \
            else ""
        args = json.dumps(call.args, sort_keys=True)
        lines.append(f"step {k:2d}{marker} {call.name} {args}")
    return "\n".join(lines) + "\n"


def parse_plan(text: str) -> ExecutablePlan:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("plan v1"):
        raise PlanCompileError("not a serialized plan")
    head = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    ids = [int(x) for x in lines[1].split(":", 1)[1].split()]
    steps: list[PrimitiveCall] = []
    markers: dict[int, int] = {}
    for ln in lines[2:]:
        toks = ln.split(None, 2)
        idx = int(toks[1])
        rest = toks[2]
        if rest.startswith("[sub"):
            sub, rest = rest.split("]", 1)
            markers[idx] = int(sub.split()[1])
            rest = rest.strip()
        name, args_json = rest.split(None, 1)
        steps.append(PrimitiveCall(name, json.loads(args_json)))
    return ExecutablePlan(steps=steps, subtask_markers=markers, subtask_ids=ids,
                          provenance=head.get("backend", "grammar"),
                          instruction_hash=head.get("hash", ""))
