from .grammar import (
    Instruction,
    PlanStep,
    SubTaskSequence,
    UnrecognizedIntent,
    decompose_steps,
    parse_intent,
    plan_subtask_ids,
)
from .primitives import LEARNED_MOTION, ENV_SIDE, PRIMITIVE_NAMES, PRIMITIVE_SCHEMAS, PrimitiveCall
from .compiler import (
    ExecutablePlan,
    PlanCompileError,
    compile_plan,
    parse_plan,
    serialize_plan,
    validate_plan,
    waypoint_library,
)
from .remote import RemoteBackend, RemoteBackendError, plan_with_fallback

__all__ = [
    "Instruction", "SubTaskSequence", "PlanStep", "UnrecognizedIntent",
    "plan_subtask_ids", "decompose_steps", "parse_intent",
    "PrimitiveCall", "PRIMITIVE_NAMES", "PRIMITIVE_SCHEMAS", "LEARNED_MOTION",
    "ENV_SIDE",
    "ExecutablePlan", "compile_plan", "validate_plan", "serialize_plan",
    "parse_plan", "PlanCompileError", "waypoint_library",
    "RemoteBackend", "RemoteBackendError", "plan_with_fallback",
]
