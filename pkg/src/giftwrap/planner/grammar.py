"""Deterministic grammar backend: instruction text to sub-task id sequences
and low-level steps.

Two entry points mirror the dual-output planner architecture: one produces
the conditioning id sequence in a single pass, the other decomposes the same
instruction into primitive-hinted steps. Both share one intent parser and
are pure functions of the normalized text plus optional scene context.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..subtasks import SUBTASKS, check_precedence


class UnrecognizedIntent(ValueError):
    def __init__(self, text: str, candidates: list[str]):
        self.candidates = candidates
        super().__init__(
            f"could not parse instruction {text!r}; nearest recognized intents: "
            + "; ".join(candidates))


@dataclass
class Instruction:
    text: str
    context: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text or not self.text.strip():
            raise ValueError("instruction text must be nonempty")


@dataclass
class SubTaskSequence:
    ids: list[int]

    def __post_init__(self) -> None:
        problems = check_precedence(self.ids)
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class PlanStep:
    description: str
    primitive_hint: str | None = None
    args: dict = field(default_factory=dict)
    subtask: int | None = None


CANONICAL_ORDER = [1, 2, 3, 4, 5]
LEFT_FIRST = [1, 3, 2, 4, 5]
RIGHT_FIRST = [2, 4, 1, 3, 5]

_INTENT_EXAMPLES = [
    "wrap the box with the white paper",
    "wrap the box from the left side",
    "fold the left side only",
    "resume the wrap from sub-task 3",
    "close both sides and tape the ends",
]


def normalize(text: str) -> str:
    text = text.lower()
    text = re.sub(r"[^a-z0-9\s-]", " ", text)
    return re.sub(r"\s+", " ", text).strip()


@dataclass
class Intent:
    kind: str                 # full | side_only | resume | close
    side: str | None = None   # left | right
    start_stage: int | None = None
    human_assist: bool = False
    assist_action: str = ""


_WRAP_WORDS = ("wrap", "gift wrap", "pack the box", "package")
_CLOSE_WORDS = ("close", "seal", "tape the ends", "tape both ends", "finish the ends")
_RESUME_WORDS = ("resume", "continue", "pick up", "carry on", "finish the wrap",
                 "finish wrapping")
_ASSIST_PATTERNS = (
    r"i will hold", r"while i hold", r"i ll hold", r"let me hold",
    r"i can hold", r"i ll press", r"i will press", r"i ll keep",
    r"hold it myself",
)


def parse_intent(instruction: Instruction) -> Intent:
    raw = normalize(instruction.text)
    if not raw:
        raise ValueError("instruction text must be nonempty")

    assist = bool(instruction.context.get("human_assist"))
    assist_action = str(instruction.context.get("assist_action", "hold the paper"))
    for pat in _ASSIST_PATTERNS:
        if re.search(pat, raw):
            assist = True
            m = re.search(r"(?:i ?(?:ll|will|can)|let me|while i) (hold|press|keep)"
                          r"(?: the| it| that)?\s*([a-z ]*)", raw)
            if m:
                assist_action = (m.group(1) + " " + m.group(2)).strip() or assist_action
            break

    m = re.search(r"sub-?task\s*([1-5])", raw)
    resume_stage = int(m.group(1)) if m else None
    side = None
    if re.search(r"\bleft\b", raw) and not re.search(r"\bright\b", raw):
        side = "left"
    elif re.search(r"\bright\b", raw) and not re.search(r"\bleft\b", raw):
        side = "right"

    # "the wrap" is the noun (the task), not a command to wrap everything
    verb_view = re.sub(r"\b(the|this|that) wrap\b", " ", raw)
    is_wrap = any(w in verb_view for w in _WRAP_WORDS)
    is_close = any(w in raw for w in _CLOSE_WORDS)
    is_resume = any(w in raw for w in _RESUME_WORDS) or "resume" in raw

    if is_resume and (resume_stage or side):
        stage = resume_stage or {"left": 3, "right": 4}[side]
        return Intent("resume", side=side, start_stage=stage,
                      human_assist=assist, assist_action=assist_action)
    if resume_stage and not is_wrap:
        return Intent("resume", start_stage=resume_stage,
                      human_assist=assist, assist_action=assist_action)
    if is_close and not is_wrap:
        return Intent("close", human_assist=assist, assist_action=assist_action)
    if is_wrap:
        return Intent("full", side=side, human_assist=assist,
                      assist_action=assist_action)
    # side-only folding without a whole-wrap cue
    if side and re.search(r"\b(fold|crease|press|do)\b", raw):
        only_edge = bool(re.search(r"(side and its edge|and the edge|edge)\b", raw)) \
            and "over" not in raw
        return Intent("side_only", side=side,
                      start_stage=1 if only_edge else None,
                      human_assist=assist, assist_action=assist_action)
    raise UnrecognizedIntent(instruction.text, list(_INTENT_EXAMPLES))


def plan_subtask_ids(instruction: Instruction) -> SubTaskSequence:
    """Sub-task id sequence for policy conditioning, in a single pass."""
    intent = parse_intent(instruction)
    if intent.kind == "full":
        if intent.side == "left":
            ids = list(LEFT_FIRST)
        elif intent.side == "right":
            ids = list(RIGHT_FIRST)
        else:
            ids = list(CANONICAL_ORDER)
    elif intent.kind == "side_only":
        base = [1, 3] if intent.side == "left" else [2, 4]
        ids = base[:1] if intent.start_stage == 1 else base
    elif intent.kind == "resume":
        ids = [s for s in CANONICAL_ORDER if s >= (intent.start_stage or 1)]
    elif intent.kind == "close":
        ids = [5]
    else:  # pragma: no cover - parse_intent rejects everything else
        raise UnrecognizedIntent(instruction.text, list(_INTENT_EXAMPLES))
    return SubTaskSequence(ids=ids)


_SIDE_OF_STAGE = {1: "left", 2: "right", 3: "left", 4: "right"}


def _steps_for_stage(stage: int) -> list[PlanStep]:
    side = _SIDE_OF_STAGE.get(stage, "")
    if stage in (1, 2):
        return [
            PlanStep(f"move above the {side} flap tip", "move_to",
                     {"target": f"{side}_flap_approach", "speed": 0.25}, stage),
            PlanStep("grasp the flap edge", "close_gripper",
                     {"width": 0.0}, stage),
            PlanStep(f"fold the {side} flap up and over the box edge",
                     "push_fold", {"subtask": stage, "crease": f"{side}_near"},
                     stage),
            PlanStep("press the panel flat on the box top", "crease_surface",
                     {"surface": "top", "force": 2.0}, stage),
            PlanStep(f"crease the {side} side against the box", "crease_edge",
                     {"corner": f"{side}_top", "force": 2.5}, stage),
            PlanStep("tape the flap to the box top", "fixate",
                     {"joint": -1, "label": f"stage{stage}"}, stage),
            PlanStep("open the gripper", "open_gripper", {"width": 0.04}, stage),
            PlanStep("retreat clear of the box", "retreat",
                     {"target": "rest"}, stage),
        ]
    if stage in (3, 4):
        return [
            PlanStep(f"peel the {side} holding tape", "release",
                     {"joint": -1}, stage),
            PlanStep(f"move above the {side} overhang tip", "move_to",
                     {"target": f"{side}_overhang_approach", "speed": 0.25}, stage),
            PlanStep("grasp the overhang", "close_gripper", {"width": 0.0}, stage),
            PlanStep(f"fold the {side} overhang over the far edge and tuck it",
                     "push_fold", {"subtask": stage, "crease": f"{side}_far"},
                     stage),
            PlanStep("tape the tail to the table", "fixate",
                     {"joint": -1, "label": f"stage{stage}"}, stage),
            PlanStep("open the gripper", "open_gripper", {"width": 0.04}, stage),
            PlanStep("press the far side flat", "crease_surface",
                     {"surface": f"{'right' if side == 'left' else 'left'}_face",
                      "force": 2.5}, stage),
            PlanStep("sharpen the far corner", "crease_edge",
                     {"corner": f"{'right' if side == 'left' else 'left'}_top",
                      "force": 3.5}, stage),
            PlanStep("retreat clear of the box", "retreat",
                     {"target": "rest"}, stage),
        ]
    return [
        PlanStep("press the left tail flat", "crease_surface",
                 {"surface": "table", "force": 2.5}, 5),
        PlanStep("tape the left paper end", "fixate",
                 {"joint": 0, "label": "left_tip"}, 5),
        PlanStep("press the right tail flat", "crease_surface",
                 {"surface": "table", "force": 2.5}, 5),
        PlanStep("tape the right paper end", "fixate",
                 {"joint": -1, "label": "right_tip"}, 5),
        PlanStep("move home", "home", {}, 5),
    ]


def decompose_steps(instruction: Instruction) -> list[PlanStep]:
    """Ordered low-level steps covering the instruction's full intent."""
    intent = parse_intent(instruction)
    ids = plan_subtask_ids(instruction).ids
    steps: list[PlanStep] = []
    for stage in ids:
        sub_steps = _steps_for_stage(stage)
        steps.append(PlanStep(
            f"start sub-task {stage}: {SUBTASKS[stage].text}", "announce",
            {"message": SUBTASKS[stage].text}, stage))
        if intent.human_assist and stage == ids[0]:
            # the assistant holds before the first fold that depends on it
            steps.append(PlanStep(
                f"wait for the assistant to {intent.assist_action}",
                "wait_for_human",
                {"timeout_s": 10.0, "action": intent.assist_action}, stage))
        steps.extend(sub_steps)
    return steps
