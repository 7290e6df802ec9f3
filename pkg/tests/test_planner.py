import json
import os
import warnings

import pytest

from giftwrap.planner import (
    ExecutablePlan,
    Instruction,
    PlanCompileError,
    PrimitiveCall,
    RemoteBackend,
    UnrecognizedIntent,
    compile_plan,
    decompose_steps,
    parse_plan,
    plan_subtask_ids,
    plan_with_fallback,
    serialize_plan,
    validate_plan,
)
from giftwrap.planner.grammar import PlanStep, SubTaskSequence

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures",
                        "instructions.json")


def corpus():
    with open(FIXTURES) as fh:
        data = json.load(fh)
    return data["canonical"] + data["paraphrases"]


def test_corpus_exact_match_and_clean_plans():
    items = corpus()
    assert len(items) == 30
    for item in items:
        inst = Instruction(item["text"])
        ids = plan_subtask_ids(inst)
        assert ids.ids == item["ids"], item["text"]
        steps = decompose_steps(inst)
        plan = compile_plan(steps, ids, instruction_text=item["text"])
        assert validate_plan(plan) == []
        if item.get("assist"):
            hints = [s.primitive_hint for s in steps]
            assert "wait_for_human" in hints
            assert hints.index("wait_for_human") < hints.index("push_fold")


def test_published_examples():
    assert plan_subtask_ids(Instruction("Wrap the box with the white paper")).ids \
        == [1, 2, 3, 4, 5]
    left = plan_subtask_ids(Instruction("wrap the box from the left side")).ids
    assert left[0] == 1 and left[-1] == 5 and left == [1, 3, 2, 4, 5]


def test_empty_instruction_rejected():
    with pytest.raises(ValueError):
        Instruction("   ")


def test_gibberish_names_candidates():
    with pytest.raises(UnrecognizedIntent) as err:
        plan_subtask_ids(Instruction("flarb the wumpus sideways"))
    assert err.value.candidates


def test_determinism_of_grammar():
    text = "Wrap the box,   with the WHITE paper!"
    a = plan_subtask_ids(Instruction(text)).ids
    b = plan_subtask_ids(Instruction(text)).ids
    assert a == b == [1, 2, 3, 4, 5]


def test_full_wrap_step_coverage():
    steps = decompose_steps(Instruction("wrap the box"))
    assert len(steps) >= 5
    assert {s.subtask for s in steps} == {1, 2, 3, 4, 5}


def test_sequence_precedence_enforced():
    with pytest.raises(ValueError):
        SubTaskSequence(ids=[5, 1, 2, 3, 4])
    with pytest.raises(ValueError):
        SubTaskSequence(ids=[3, 1])


def test_golden_subtask1_plan_structure():
    inst = Instruction("crease the left side and its edge")
    plan = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                        instruction_text=inst.text)
    names = [c.name for c in plan.steps]
    assert names[:6] == ["announce", "move_to", "close_gripper", "push_fold",
                         "crease_surface", "crease_edge"]
    assert validate_plan(plan) == []


def test_unknown_pose_names_step():
    steps = [PlanStep("go somewhere odd", "move_to",
                      {"target": "nowhere", "speed": 0.2}, 1)]
    with pytest.raises(PlanCompileError) as err:
        compile_plan(steps, SubTaskSequence(ids=[1]))
    assert "nowhere" in str(err.value)


def test_unbound_step_rejected():
    steps = [PlanStep("do something, somehow", None, {}, 1)]
    with pytest.raises(PlanCompileError):
        compile_plan(steps, SubTaskSequence(ids=[1]))


def test_wait_for_human_binding():
    inst = Instruction("wrap the box while I hold the paper down")
    plan = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                        instruction_text=inst.text)
    waits = [c for c in plan.steps if c.name == "wait_for_human"]
    assert len(waits) == 1
    assert waits[0].args["timeout_s"] > 0


def test_validate_plan_flags_schema_and_precedence():
    bad = ExecutablePlan(
        steps=[PrimitiveCall("grab_it", {}),
               PrimitiveCall("move_to", {"target": "rest"})],
        subtask_markers={0: 5, 1: 1}, subtask_ids=[5, 1])
    problems = validate_plan(bad)
    assert any("unknown primitive" in p for p in problems)
    assert any("missing argument" in p for p in problems)
    assert any("before its prerequisite" in p for p in problems)


def test_validate_plan_policy_coverage():
    inst = Instruction("fold the left side only")
    plan = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                        instruction_text=inst.text)
    assert validate_plan(plan, policy_vocab=(1, 2, 3, 4, 5)) == []
    problems = validate_plan(plan, policy_vocab=(2, 4))
    assert any("policy coverage" in p for p in problems)


def test_plan_serialization_round_trip():
    inst = Instruction("wrap the box from the right side")
    plan = compile_plan(decompose_steps(inst), plan_subtask_ids(inst),
                        instruction_text=inst.text)
    text = serialize_plan(plan)
    again = parse_plan(text)
    assert [c.name for c in again.steps] == [c.name for c in plan.steps]
    assert all(a.args == b.args for a, b in zip(again.steps, plan.steps))
    assert again.subtask_markers == plan.subtask_markers
    assert serialize_plan(again) == text


def test_remote_backend_roundtrip_and_fallback():
    reply = "\n".join([
        "ids: 1 2 3 4 5",
        "step: start sub-task 1: push and crease | announce "
        '| message="go"',
        "step: move above the left flap tip | move_to "
        '| target="left_flap_approach" speed=0.25',
    ])
    backend = RemoteBackend(url="http://planner.local",
                            transport=lambda *a, **k: reply)
    ids, steps, used = plan_with_fallback(Instruction("wrap the box"), backend)
    assert used == "remote"
    assert ids.ids == [1, 2, 3, 4, 5]
    assert steps[1].primitive_hint == "move_to"

    def broken(*a, **k):
        raise OSError("connection refused")

    backend = RemoteBackend(url="http://planner.local", transport=broken)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ids, steps, used = plan_with_fallback(Instruction("wrap the box"), backend)
    assert used == "grammar"
    assert ids.ids == [1, 2, 3, 4, 5]
    assert any("falling back" in str(w.message) for w in caught)


def test_remote_invalid_sequence_falls_back():
    reply = "ids: 5 1 2 3 4"
    backend = RemoteBackend(url="http://planner.local",
                            transport=lambda *a, **k: reply)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("ignore")
        ids, _, used = plan_with_fallback(Instruction("wrap the box"), backend)
    assert used == "grammar"
