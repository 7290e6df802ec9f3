"""Admittance control: waypoints plus residual corrections and gains become
force commands for the simulator at a fixed control rate.

The command law is F = Kp (P_d - P) + Kd (V_d - V) with per-axis diagonal
gains, clipped per axis to the force limit. Gains are adapted online by the
residual agent; the waypoint stream comes from the chunking policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim.core import GripperCommand, SimState, Simulator, WrenchReading

SOURCE_START = "START"
SOURCE_RESIDUAL = "START+residual"


@dataclass
class CommandLimits:
    max_force: float = 20.0                      # N per axis
    residual_bound: float = 0.005                # m per axis
    kp_bounds: tuple[float, float] = (50.0, 500.0)
    kd_bounds: tuple[float, float] = (1.0, 50.0)
    control_rate: float = 40.0                   # Hz

    def __post_init__(self) -> None:
        if min(self.max_force, self.residual_bound, self.control_rate) <= 0:
            raise ValueError("limits must be positive")
        if self.kp_bounds[0] < 0 or self.kp_bounds[0] >= self.kp_bounds[1]:
            raise ValueError("invalid kp bounds")
        if self.kd_bounds[0] < 0 or self.kd_bounds[0] >= self.kd_bounds[1]:
            raise ValueError("invalid kd bounds")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass
class AdmittanceGains:
    kp: np.ndarray   # (2,) N/m, diagonal
    kd: np.ndarray   # (2,) N.s/m, diagonal

    @classmethod
    def uniform(cls, kp: float, kd: float) -> "AdmittanceGains":
        return cls(np.full(2, float(kp)), np.full(2, float(kd)))

    @classmethod
    def default(cls, limits: CommandLimits | None = None) -> "AdmittanceGains":
        lim = limits or CommandLimits()
        return cls.uniform(np.mean(lim.kp_bounds), np.mean(lim.kd_bounds))

    def clipped(self, limits: CommandLimits) -> "AdmittanceGains":
        return AdmittanceGains(
            np.clip(self.kp, limits.kp_bounds[0], limits.kp_bounds[1]),
            np.clip(self.kd, limits.kd_bounds[0], limits.kd_bounds[1]),
        )


@dataclass
class Waypoint:
    position_desired: np.ndarray   # (2,) m
    velocity_desired: np.ndarray   # (2,) m/s
    gripper_desired: float         # aperture, m
    source: str = SOURCE_START
    orientation_desired: float = 0.0   # planar yaw channel of the action

    def copy(self) -> "Waypoint":
        return Waypoint(self.position_desired.copy(), self.velocity_desired.copy(),
                        self.gripper_desired, self.source, self.orientation_desired)


@dataclass
class TrackingRecord:
    time: float
    position_error: np.ndarray
    wrench: WrenchReading
    command_force: np.ndarray
    clipped: np.ndarray            # (2,) bool, per-axis saturation
    gains_kp: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gains_kd: np.ndarray = field(default_factory=lambda: np.zeros(2))


def compute_admittance_command(gains: AdmittanceGains, wp: Waypoint,
                               position: np.ndarray, velocity: np.ndarray,
                               limits: CommandLimits | None = None,
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Force command and per-axis clipping flags."""
    pos_err = np.asarray(wp.position_desired, dtype=float) - np.asarray(position, dtype=float)
    vel_err = np.asarray(wp.velocity_desired, dtype=float) - np.asarray(velocity, dtype=float)
    force = gains.kp * pos_err + gains.kd * vel_err
    fmax = (limits or CommandLimits()).max_force
    clipped = np.abs(force) > fmax
    return np.clip(force, -fmax, fmax), clipped


def apply_residual(waypoint_start: Waypoint, delta_p: np.ndarray,
                   limits: CommandLimits) -> Waypoint:
    """Shift a START waypoint by a bounded Cartesian correction."""
    if waypoint_start.source != SOURCE_START:
        raise ValueError("residuals apply to START waypoints only")
    delta = np.clip(np.asarray(delta_p, dtype=float),
                    -limits.residual_bound, limits.residual_bound)
    wp = waypoint_start.copy()
    wp.position_desired = wp.position_desired + delta
    wp.source = SOURCE_RESIDUAL
    return wp


def run_control_step(sim: Simulator, state: SimState, wp: Waypoint,
                     gains: AdmittanceGains, limits: CommandLimits,
                     ) -> tuple[SimState, WrenchReading, TrackingRecord]:
    """Close the admittance law over the plant for one control tick."""
    gains = gains.clipped(limits)
    position = state.gripper_pose[:2]
    velocity = state.gripper_velocity
    force, clipped = compute_admittance_command(gains, wp, position, velocity, limits)
    yaw_err = wp.orientation_desired - state.gripper_pose[2]
    torque = float(np.clip(2.0 * yaw_err, -1.0, 1.0))
    command = GripperCommand(force=force, torque=torque, aperture=wp.gripper_desired)
    new_state, wrench = sim.step(state, command, limits.dt)
    record = TrackingRecord(
        time=new_state.time,
        position_error=wp.position_desired - new_state.gripper_pose[:2],
        wrench=wrench,
        command_force=force,
        clipped=clipped,
        gains_kp=gains.kp.copy(),
        gains_kd=gains.kd.copy(),
    )
    return new_state, wrench, record
