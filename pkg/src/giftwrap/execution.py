"""Policy-driven sub-task execution: chunk inference with temporal
ensembling, optional residual corrections, transition-driven advancement and
the tape/peel bookkeeping that mirrors the scripted demonstrations.

Tape timing replays the demonstrations' rule: the pending tape goes on when
the policy releases its grasp; any tape still pending is applied when the
sub-task ends. The overhang folds peel the previous side tape at start.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import AdmittanceGains, CommandLimits, Waypoint, apply_residual, run_control_step
from .policy.rotation import yaw_from_matrix
from .policy.runtime import PolicyRuntime, TemporalEnsemble, TransitionDetector
from .policy.types import Observation
from .residual.reward import RewardWeights, build_state, compute_reward
from .sim.core import SimState, Simulator
from .sim.render import render_observation
from .subtasks import SUBTASKS


@dataclass
class TickLog:
    time: float
    force: float
    f_desired: float
    position_error: float
    flag_prob: float


@dataclass
class SubtaskResult:
    state: SimState
    ticks: int
    timed_out: bool
    peak_force: float
    mean_force: float
    mean_force_error: float
    logs: list[TickLog] = field(default_factory=list)


FRAME_CAPS = {1: 3400, 2: 3400, 3: 2000, 4: 2000, 5: 1300}


class SubtaskExecutor:
    """Runs one sub-task under a chunking policy on one simulator."""

    def __init__(self, sim: Simulator, runtime: PolicyRuntime,
                 limits: CommandLimits | None = None,
                 gains: AdmittanceGains | None = None,
                 ensemble_decay: float = 0.25,
                 flag_threshold: float = 0.5,
                 flag_consecutive: int = 3,
                 infer_every: int | None = None,
                 stiff_position_only: bool = False):
        self.sim = sim
        self.runtime = runtime
        self.limits = limits or CommandLimits()
        self.gains = gains or AdmittanceGains.default(self.limits)
        if stiff_position_only:
            # position-only ablation: rail the gains, no force compliance
            self.gains = AdmittanceGains.uniform(self.limits.kp_bounds[1],
                                                 self.limits.kd_bounds[1])
        self.stiff = stiff_position_only
        self.decay = ensemble_decay
        self.flag_threshold = flag_threshold
        self.flag_consecutive = flag_consecutive
        self.infer_every = infer_every or max(1, runtime.cfg.chunk_length // 2)

    def _observe(self, state: SimState, stage: int, wrench6: np.ndarray) -> Observation:
        feats = None
        images = None
        if self.runtime.cfg.use_images:
            images = (render_observation(self.sim, state, "wrist"),
                      render_observation(self.sim, state, "side"))
        else:
            feats = self.sim.privileged_features(state)
        return Observation(
            robot_state=np.array([state.gripper_pose[0], state.gripper_pose[1],
                                  state.gripper_pose[2], state.gripper_aperture]),
            wrench=wrench6, subtask=SUBTASKS[stage], features=feats,
            images=images)

    def run(self, state: SimState, stage: int,
            agent=None, agent_stochastic: bool = False,
            force_profile: np.ndarray | None = None,
            expected_ticks: int | None = None,
            manual_ticks: int | None = None,
            frame_cap: int | None = None,
            reward_weights: RewardWeights | None = None,
            on_transition=None) -> SubtaskResult:
        """Execute one sub-task; advancement comes from the policy's
        transition flag unless manual_ticks forces a fixed count."""
        sim = self.sim
        lay = sim.layout
        cap = frame_cap or FRAME_CAPS.get(stage, 3000)
        weights = reward_weights or RewardWeights()
        sim.score_stage(state, stage)
        if stage in (3, 4):
            sim.release_pin(state, lay.fixate_joints[stage - 2][0])

        pending_tapes = list(lay.fixate_joints.get(stage, ()))
        ensemble = TemporalEnsemble(self.decay)
        detector = TransitionDetector(self.flag_threshold, self.flag_consecutive)
        wrench6 = np.zeros(6)
        f_prev = 0.0
        fd_prev = 0.0
        was_grasping = False
        logs: list[TickLog] = []
        peak = 0.0
        sum_f = 0.0
        sum_ferr = 0.0
        timed_out = True
        expected = expected_ticks or cap

        for t in range(cap):
            if t % self.infer_every == 0 or not ensemble.chunks:
                obs = self._observe(state, stage, wrench6)
                ensemble.add(self.runtime.predict_chunk(obs, start_tick=t))
            action, flag_prob = ensemble.action_at(t)
            yaw = yaw_from_matrix(action.rotation_matrix())
            wp = Waypoint(action.position[:2].copy(), np.zeros(2),
                          float(np.clip(action.gripper, 0.0,
                                        sim.config.aperture_max)),
                          orientation_desired=yaw)
            gains = self.gains
            if force_profile is not None:
                frac = min(t / max(expected, 1), 0.999)
                f_des = float(force_profile[int(frac * len(force_profile))])
            else:
                f_des = 0.0
            if agent is not None:
                s_vec = build_state(state.gripper_pose[:2], state.gripper_velocity,
                                    wrench6, fd_prev, wp.position_desired)
                a_env = agent.sample_action(s_vec, stochastic=agent_stochastic)
                wp = apply_residual(wp, a_env[:2], self.limits)
                gains = AdmittanceGains(a_env[2:4].copy(), a_env[4:6].copy()) \
                    .clipped(self.limits)
            state, wrench, _ = run_control_step(sim, state, wp, gains, self.limits)
            wrench6 = np.concatenate([wrench.force, wrench.torque])
            f_mag = float(np.linalg.norm(wrench.force[:2]))
            if agent is not None and hasattr(agent, "transition"):
                s2 = build_state(state.gripper_pose[:2], state.gripper_velocity,
                                 wrench6, f_des, wp.position_desired)
                r = compute_reward(wp.position_desired, state.gripper_pose[:2],
                                   [f_mag], [f_des], [f_mag - f_prev], weights)
                agent.transition(s_vec, a_env, r, s2, False)
            f_prev = f_mag
            fd_prev = f_des
            peak = max(peak, f_mag)
            sum_f += f_mag
            sum_ferr += abs(f_mag - f_des)
            logs.append(TickLog(state.time, f_mag, f_des,
                                float(np.linalg.norm(
                                    wp.position_desired - state.gripper_pose[:2])),
                                flag_prob))

            # tape goes on when the policy releases its grasp
            grasping = state.grasped_joint is not None
            if was_grasping and not grasping and pending_tapes:
                sim.fixate(state, pending_tapes.pop(0))
            was_grasping = grasping

            if manual_ticks is not None:
                if t + 1 >= manual_ticks:
                    timed_out = False
                    break
            elif detector.update(flag_prob):
                timed_out = False
                break

        ticks = len(logs)
        for j in pending_tapes:
            sim.fixate(state, j)
        sim.mark_stage_complete(state, stage)
        if on_transition:
            on_transition(state, stage, timed_out)
        return SubtaskResult(
            state=state, ticks=ticks, timed_out=timed_out, peak_force=peak,
            mean_force=sum_f / max(ticks, 1),
            mean_force_error=sum_ferr / max(ticks, 1), logs=logs)
