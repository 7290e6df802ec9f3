import numpy as np
import pytest

from giftwrap.control import (
    AdmittanceGains,
    CommandLimits,
    SOURCE_RESIDUAL,
    SOURCE_START,
    Waypoint,
    apply_residual,
    compute_admittance_command,
    run_control_step,
)
from giftwrap.sim import Simulator


def wp(pos, vel=(0.0, 0.0), grip=0.04):
    return Waypoint(np.array(pos, dtype=float), np.array(vel, dtype=float), grip)


def test_command_direct_substitution():
    gains = AdmittanceGains.uniform(100.0, 0.0)
    force, clipped = compute_admittance_command(
        gains, wp([0.01, 0.0]), np.zeros(2), np.zeros(2))
    assert np.allclose(force, [1.0, 0.0])
    assert not clipped.any()


def test_command_zero_error_is_zero():
    gains = AdmittanceGains.uniform(321.0, 17.0)
    p = np.array([0.3, -0.2])
    v = np.array([0.05, 0.01])
    force, _ = compute_admittance_command(gains, wp(p, v), p, v)
    assert np.allclose(force, 0.0)


def test_command_with_damping_term():
    gains = AdmittanceGains.uniform(200.0, 10.0)
    force, _ = compute_admittance_command(
        gains, wp([0.0, 0.02], [0.0, -0.1]), np.zeros(2), np.zeros(2))
    assert np.allclose(force, [0.0, 3.0])


def test_command_linearity_before_clipping(rng):
    gains = AdmittanceGains(rng.uniform(50, 500, 2), rng.uniform(1, 50, 2))
    limits = CommandLimits(max_force=1e9)
    for _ in range(200):
        pe1, ve1 = rng.normal(0, 0.02, 2), rng.normal(0, 0.1, 2)
        pe2, ve2 = rng.normal(0, 0.02, 2), rng.normal(0, 0.1, 2)
        a, b = rng.normal(), rng.normal()
        f1, _ = compute_admittance_command(gains, wp(pe1, ve1), np.zeros(2),
                                           np.zeros(2), limits)
        f2, _ = compute_admittance_command(gains, wp(pe2, ve2), np.zeros(2),
                                           np.zeros(2), limits)
        f12, _ = compute_admittance_command(
            gains, wp(a * pe1 + b * pe2, a * ve1 + b * ve2), np.zeros(2),
            np.zeros(2), limits)
        assert np.allclose(f12, a * f1 + b * f2, atol=1e-9)


def test_command_saturation(rng):
    limits = CommandLimits(max_force=20.0)
    gains = AdmittanceGains.uniform(500.0, 50.0)
    for _ in range(500):
        force, clipped = compute_admittance_command(
            gains, wp(rng.normal(0, 0.5, 2), rng.normal(0, 2.0, 2)),
            np.zeros(2), np.zeros(2), limits)
        assert np.all(np.abs(force) <= limits.max_force + 1e-12)
    big, clipped = compute_admittance_command(
        gains, wp([1.0, 0.0]), np.zeros(2), np.zeros(2), limits)
    assert big[0] == pytest.approx(20.0) and clipped[0]


def test_apply_residual_identity_retags():
    limits = CommandLimits()
    base = wp([0.1, 0.2])
    out = apply_residual(base, np.zeros(2), limits)
    assert np.allclose(out.position_desired, base.position_desired)
    assert out.source == SOURCE_RESIDUAL
    assert base.source == SOURCE_START


def test_apply_residual_clamps_per_axis():
    limits = CommandLimits(residual_bound=0.01)
    out = apply_residual(wp([0.0, 0.0]), np.array([0.05, 0.0]), limits)
    assert np.allclose(out.position_desired, [0.01, 0.0])


def test_apply_residual_interior_point_exact():
    limits = CommandLimits(residual_bound=0.01)
    out = apply_residual(wp([0.0, 0.0]), np.array([-0.004, 0.003]), limits)
    assert np.allclose(out.position_desired, [-0.004, 0.003])


def test_apply_residual_never_exceeds_bound(rng):
    limits = CommandLimits(residual_bound=0.005)
    for _ in range(300):
        base = wp(rng.normal(0, 0.2, 2))
        out = apply_residual(base, rng.normal(0, 0.02, 2), limits)
        assert np.all(np.abs(out.position_desired - base.position_desired)
                      <= limits.residual_bound + 1e-12)


def test_apply_residual_requires_start_source():
    limits = CommandLimits()
    shifted = apply_residual(wp([0.0, 0.0]), np.zeros(2), limits)
    with pytest.raises(ValueError):
        apply_residual(shifted, np.zeros(2), limits)


def test_run_control_step_holds_station():
    sim = Simulator()
    state = sim.reset("full")
    limits = CommandLimits()
    gains = AdmittanceGains.default(limits)
    start = state.gripper_pose[:2].copy()
    target = wp(start, grip=0.04)
    for _ in range(40):  # 1 s
        state, wrench, rec = run_control_step(sim, state, target, gains, limits)
    assert np.linalg.norm(state.gripper_pose[:2] - start) < 1e-4


def test_run_control_step_converges_monotonically_after_transient():
    sim = Simulator()
    state = sim.reset("full")
    limits = CommandLimits()
    gains = AdmittanceGains.uniform(300.0, 30.0)
    target = wp(state.gripper_pose[:2] + np.array([0.05, 0.0]))
    errs = []
    for _ in range(60):
        state, _, rec = run_control_step(sim, state, target, gains, limits)
        errs.append(np.linalg.norm(rec.position_error))
    tail = errs[5:]
    assert all(b <= a + 1e-9 for a, b in zip(tail, tail[1:]))
    assert errs[-1] < 1e-3


def test_run_control_step_contact_force_balance():
    sim = Simulator()
    state = sim.reset("full")
    limits = CommandLimits()
    gains = AdmittanceGains.uniform(300.0, 30.0)
    lay = sim.layout
    above = np.array([0.0, lay.box_y1 + 0.15])
    for _ in range(80):
        state, _, _ = run_control_step(sim, state, wp(above), gains, limits)
    inside = np.array([0.0, lay.box_y1 - 0.004])
    for _ in range(120):
        state, wrench, rec = run_control_step(sim, state, wp(inside), gains, limits)
    # steady state: command balances contact; reading ~ Kp * penetration-free error
    residual_err = inside[1] - state.gripper_pose[1]
    expect = abs(gains.kp[1] * residual_err)
    assert abs(np.linalg.norm(wrench.force[:2]) - expect) < 0.1 * max(expect, 1.0)
