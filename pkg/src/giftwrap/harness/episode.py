"""End-to-end episode runner: executes a compiled plan with a trained policy
(and optionally a residual agent), advancing sub-tasks on the learned
transition flag."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..control import CommandLimits
from ..execution import FRAME_CAPS, SubtaskExecutor, SubtaskResult
from ..planner.compiler import ExecutablePlan
from ..planner.primitives import ENV_SIDE, LEARNED_MOTION
from ..policy.runtime import PolicyRuntime
from ..sim.core import DefectScores, SimState, Simulator
from .metrics import PISWeights, SuccessCriteria, compute_pis, judge_success


class PlanPolicyMismatch(ValueError):
    pass


@dataclass
class EpisodeResult:
    success: bool
    per_subtask: dict[int, bool]
    scores: DefectScores
    pi: float
    duration_s: float
    peak_force: float
    mean_force: float
    mean_force_error: float
    violations: list[str]
    timeouts: int
    subtask_results: dict[int, SubtaskResult] = field(default_factory=dict)
    trace: list = field(default_factory=list)


@dataclass
class EpisodeOptions:
    manual_transition: bool = False
    stiff_position_only: bool = False
    use_residual: bool = True
    flag_threshold: float = 0.5
    ensemble_decay: float = 0.25
    human_assist_delay_s: float = 0.5
    criteria: SuccessCriteria = field(default_factory=SuccessCriteria)
    weights: PISWeights = field(default_factory=PISWeights)
    frame_caps: dict[int, int] = field(default_factory=lambda: dict(FRAME_CAPS))


def run_episode(sim: Simulator, plan: ExecutablePlan,
                policy: PolicyRuntime | dict[int, PolicyRuntime],
                agent=None, options: EpisodeOptions | None = None,
                force_profiles: dict[int, np.ndarray] | None = None,
                expected_ticks: dict[int, int] | None = None,
                limits: CommandLimits | None = None,
                scenario: str | int = "full") -> EpisodeResult:
    """Execute a plan end to end.

    `policy` is a single unified runtime or a per-sub-task mapping (the
    modular baseline: each sub-policy's own flag head switches it out).
    Raises PlanPolicyMismatch before execution when a plan marker lacks
    policy coverage.
    """
    opts = options or EpisodeOptions()
    modular = isinstance(policy, dict)
    order = [plan.subtask_markers[i] for i in sorted(plan.subtask_markers)]
    for sid in order:
        if modular:
            if sid not in policy:
                raise PlanPolicyMismatch(f"no sub-policy for sub-task {sid}")
        elif sid not in policy.vocab:
            raise PlanPolicyMismatch(f"sub-task {sid} missing from policy vocabulary")

    state = sim.reset(scenario)
    timeouts = 0
    per_subtask: dict[int, bool] = {}
    sub_results: dict[int, SubtaskResult] = {}
    trace = []
    peak = 0.0
    mean_fs = []
    mean_ferr = []

    # group plan steps by their sub-task marker
    groups: dict[int, list] = {}
    for i, call in enumerate(plan.steps):
        groups.setdefault(plan.subtask_of_step(i), []).append(call)

    for stage in order:
        runtime = policy[stage] if modular else policy
        executor = SubtaskExecutor(
            sim, runtime, limits=limits,
            ensemble_decay=opts.ensemble_decay,
            flag_threshold=opts.flag_threshold,
            stiff_position_only=opts.stiff_position_only)
        calls = groups.get(stage, [])
        # env-side steps that precede any learned motion run up front
        for call in calls:
            if call.name in LEARNED_MOTION:
                break
            state = _run_env_step(sim, state, call, opts)
        manual = None
        if opts.manual_transition:
            manual = (expected_ticks or {}).get(stage) or \
                opts.frame_caps.get(stage, 2000) // 2
        result = executor.run(
            state, stage,
            agent=agent if opts.use_residual else None,
            force_profile=(force_profiles or {}).get(stage),
            expected_ticks=(expected_ticks or {}).get(stage),
            manual_ticks=manual,
            frame_cap=opts.frame_caps.get(stage))
        state = result.state
        sub_results[stage] = result
        timeouts += int(result.timed_out)
        peak = max(peak, result.peak_force)
        mean_fs.append(result.mean_force)
        mean_ferr.append(result.mean_force_error)
        # trailing env-side steps (wait_for_human, announce, home)
        seen_motion = False
        for call in calls:
            if call.name in LEARNED_MOTION:
                seen_motion = True
                continue
            if seen_motion and call.name in ("wait_for_human",):
                state = _run_env_step(sim, state, call, opts)
        ok, viol = judge_success(sim, state, opts.criteria, stages=(stage,))
        per_subtask[stage] = ok
        trace.append({"stage": stage, "ticks": result.ticks,
                      "timed_out": result.timed_out,
                      "peak_force": result.peak_force, "ok": ok})

    ok, violations = judge_success(sim, state, opts.criteria,
                                   stages=tuple(order))
    scores = sim.compute_defects(state)
    pi = compute_pis(scores, opts.weights)
    return EpisodeResult(
        success=ok, per_subtask=per_subtask, scores=scores, pi=pi,
        duration_s=state.time, peak_force=peak,
        mean_force=float(np.mean(mean_fs)) if mean_fs else 0.0,
        mean_force_error=float(np.mean(mean_ferr)) if mean_ferr else 0.0,
        violations=violations, timeouts=timeouts,
        subtask_results=sub_results, trace=trace)


def _run_env_step(sim: Simulator, state: SimState, call, opts: EpisodeOptions):
    """Environment-side primitives the harness performs itself."""
    from ..sim.core import GripperCommand

    if call.name == "announce":
        return state
    if call.name == "release":
        sim.release_pin(state, int(call.args["joint"]))
        return state
    if call.name == "fixate":
        sim.fixate(state, int(call.args["joint"]))
        return state
    if call.name == "wait_for_human":
        # scripted-assist stub: after the configured delay the assistant
        # steadies the nearest free paper corner by holding it in place
        ticks = max(1, int(opts.human_assist_delay_s * 40))
        for _ in range(ticks):
            state, _ = sim.step(state, GripperCommand.zero(), 1.0 / 40.0)
        n = sim.config.segment_count
        for tip in (0, n):
            if tip not in state.pins:
                sim.fixate(state, tip)
                break
        return state
    if call.name == "home":
        return state
    return state
