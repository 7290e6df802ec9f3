import numpy as np
from giftwrap.sim import Simulator
from giftwrap.sim.scenario import folded_positions
from giftwrap.control import CommandLimits, AdmittanceGains, Waypoint, run_control_step

sim = Simulator(); lim = CommandLimits(); gains = AdmittanceGains.default(lim)
soft_lim = CommandLimits(max_force=13.0)
soft_gains = AdmittanceGains.uniform(200.0, 26.0)
lay = sim.layout
ticks = [0]
GUARD = 5.5
SOFT = [False]

PHASE = ['?']
TORN = [0]

PHASE_TICKS = {}

def step(s, pos, aperture):
    ticks[0] += 1
    PHASE_TICKS[PHASE[0]] = PHASE_TICKS.get(PHASE[0], 0) + 1
    g, l = (soft_gains, soft_lim) if SOFT[0] else (gains, lim)
    s, w, _ = run_control_step(sim, s, Waypoint(np.asarray(pos, float), np.zeros(2), aperture), g, l)
    tc = int(s.chain.torn.sum())
    if tc > TORN[0]:
        print('  !! TEAR during', PHASE[0], 'segments', np.where(s.chain.torn)[0],
              'grip', s.gripper_pose[:2].round(3), 'tick', ticks[0])
        TORN[0] = tc
    return s, w

def offset(s):
    return s.grasp_offset if s.grasp_offset is not None else np.zeros(2)

def pinch_goto(s, pinch_target, aperture=0.0, tol=2.5e-3, timeout=300, carrot=0.05,
               blocked_exit=45, guard=6.0):
    target = np.asarray(pinch_target, float)
    w = None
    blocked = 0
    for _ in range(timeout):
        tension = s.chain.tension.max()
        load = 0.0 if w is None else float(np.linalg.norm(w.force[:2]))
        cur_pinch = s.gripper_pose[:2] + offset(s)
        err = target - cur_pinch
        d = np.linalg.norm(err)
        if tension >= guard or load >= 7.0:
            wp = s.gripper_pose[:2].copy()
            blocked += 1
        else:
            goal = target if d < carrot else cur_pinch + err / d * carrot
            wp = goal - offset(s)
        s, w = step(s, wp, aperture)
        if d < tol or blocked >= blocked_exit:
            break
    return s, w

def pinch_arc(s, pivot, r, phi1, aperture=0.0, speed=0.18, settle=8, guard=6.5):
    cur = s.gripper_pose[:2] + offset(s)
    phi0 = np.arctan2(cur[1] - pivot[1], cur[0] - pivot[0])
    n = max(2, int(abs(phi1 - phi0) * r / speed * 40))
    phis = np.linspace(phi0, phi1, n)
    i = 0
    w = None
    no_advance = 0
    for _ in range(8 * n + 300):
        cur = s.gripper_pose[:2] + offset(s)
        load = 0.0 if w is None else float(np.linalg.norm(w.force[:2]))
        if s.chain.tension.max() >= guard or load >= 7.5:
            wp = s.gripper_pose[:2].copy()
            no_advance += 1
        else:
            tgt = pivot + r * np.array([np.cos(phis[i]), np.sin(phis[i])])
            if i < n - 1 and np.linalg.norm(tgt - cur) < 0.05:
                i += 1
                no_advance = 0
                tgt = pivot + r * np.array([np.cos(phis[i]), np.sin(phis[i])])
            else:
                no_advance += 1
            wp = tgt - offset(s)
        s, w = step(s, wp, aperture)
        if no_advance >= 160:
            break
        if i >= n - 1:
            settle -= 1
            if settle <= 0:
                break
    return s, w

def press(s, direction, aperture, force=3.0, timeout=120, hold=10):
    """Advance the waypoint along the press axis from the current anchor
    until the wrench reaches the force target, then withdraw to the anchor.
    The waypoint never leaves the press line, so approach clearances hold."""
    direction = np.asarray(direction, float) / np.linalg.norm(direction)
    anchor = s.gripper_pose[:2].copy()
    advance = 0.0
    w = None; count = 0
    for _ in range(timeout):
        f = 0.0 if w is None else float(np.linalg.norm(w.force[:2]))
        if f < force:
            advance += 0.0014
        s, w = step(s, anchor + direction * advance, aperture)
        rel = s.gripper_pose[:2] - anchor
        perp = rel - np.dot(rel, direction) * direction
        if np.linalg.norm(perp) > 0.008:
            break   # body deflected off the press line: abort
        if f >= force:
            count += 1
            if count >= hold:
                break
    s, w = goto(s, anchor, aperture, tol=5e-3, timeout=60)
    return s, w

def goto(s, target, aperture=0.04, tol=3e-3, timeout=250, carrot=0.08):
    target = np.asarray(target, float); w = None
    for _ in range(timeout):
        err = target - s.gripper_pose[:2]; d = np.linalg.norm(err)
        wp = target if d < carrot else s.gripper_pose[:2] + err / d * carrot
        s, w = step(s, wp, aperture)
        if d < tol:
            break
    return s, w

SAFE_Y = 0.13

def transit(s, target, aperture=0.04, tol=5e-3, timeout_leg=120):
    cur = s.gripper_pose[:2]
    s, w = goto(s, [cur[0], SAFE_Y], aperture, tol=6e-3, timeout=timeout_leg)
    s, w = goto(s, [target[0], SAFE_Y], aperture, tol=6e-3, timeout=timeout_leg)
    s, w = goto(s, target, aperture, tol=tol, timeout=timeout_leg)
    return s, w

def close(s):
    for _ in range(10):
        s, w = step(s, s.gripper_pose[:2].copy(), 0.0)
    return s, w

def grasp_joint(s, jend, attempts=3):
    """Approach the chain end from above and pinch it; re-read the tip
    between attempts since the paper may still be settling."""
    for k in range(attempts):
        tip = s.chain.joint_positions[jend].copy()
        s, w = goto(s, tip + [0, 0.04], 0.04, tol=4e-3, timeout=150)
        tip = s.chain.joint_positions[jend].copy()
        s, w = goto(s, tip + [0, 0.0075], 0.04, tol=2.2e-3, carrot=0.03, timeout=120)
        s, w = close(s)
        if s.grasped_joint is not None:
            return s, w
        for _ in range(6):
            s, w = step(s, s.gripper_pose[:2].copy(), 0.04)
    return s, w

def release_up(s, lift=0.05):
    for _ in range(8):
        s, w = step(s, s.gripper_pose[:2].copy(), 0.04)
    s, w = goto(s, s.gripper_pose[:2] + [0, lift], 0.04, tol=5e-3, timeout=100)
    return s, w


def run_side_fold(s, side):
    sgn = 1.0 if side == 'left' else -1.0
    jend = 0 if side == 'left' else sim.config.segment_count
    j_edge = lay.j_left if side == 'left' else lay.j_right
    x_face = lay.box_x0 if side == 'left' else lay.box_x1
    corner_top = np.array([x_face, lay.box_y1])
    ds = sim.config.segment_length

    tip = s.chain.joint_positions[jend].copy()
    PHASE[0] = 'approach'
    s, w = transit(s, tip + [0, 0.05])
    s, w = grasp_joint(s, jend)
    jg = s.grasped_joint
    print('  grasped', jg, 'torn', s.chain.torn.sum())
    L1 = abs(j_edge - jg) * ds

    SOFT[0] = True
    bottom = np.array([x_face, 0.0])
    phi_up = np.pi / 2 + sgn * np.radians(7)
    PHASE[0] = 'pullup'
    s, w = pinch_arc(s, bottom, L1 - 0.003, phi_up)
    print('  after pull-up torn', s.chain.torn.sum(), np.where(s.chain.torn)[0])
    L2 = L1 - 5 * ds
    r2 = L2 - 0.002
    phi_end = np.pi / 2 - sgn * (np.pi / 2 - np.arcsin(0.002 / r2))
    PHASE[0] = 'sweep'
    s, w = pinch_arc(s, corner_top, r2, phi_end, settle=12)
    print('  after sweep torn', s.chain.torn.sum(), np.where(s.chain.torn)[0])
    PHASE[0] = 'taut'
    s, w = pinch_goto(s, [corner_top[0] + sgn * (L2 + 0.01), lay.box_y1 + 0.004],
                      timeout=200)
    SOFT[0] = False

    PHASE[0] = 'tape-release'
    tape_j = lay.fixate_joints[1 if side == 'left' else 2][0]
    print('  tape joint', tape_j, 'at', s.chain.joint_positions[tape_j].round(4),
          '(want y ~ %.4f)' % (lay.box_y1 + 0.0001))
    sim.fixate(s, tape_j)
    PHASE[0] = 'release'
    s, w = release_up(s)
    print('  after release torn', s.chain.torn.sum(), np.where(s.chain.torn)[0])

    PHASE[0] = 'top-press'
    s, w = transit(s, [sgn * -0.03, lay.box_y1 + 0.045])
    s, w = press(s, [0, -1], 0.04, force=2.0)
    print('  post top-press torn', np.where(s.chain.torn)[0], 'grip', s.gripper_pose[:2].round(3))
    for py in (0.040, 0.02):
        PHASE[0] = 'side-press'
        s, w = transit(s, [x_face - sgn * 0.14, py], tol=5e-3)
        s, w = press(s, [sgn, 0], 0.04, force=2.5, timeout=140)
        print('  post side-press', py, 'torn', np.where(s.chain.torn)[0], 'grip', s.gripper_pose[:2].round(3))
    PHASE[0] = 'home'
    s, w = transit(s, [0.0, 0.30], tol=8e-3)
    return s


s = sim.reset('subtask-1')
sim.score_stage(s, 1)
s = run_side_fold(s, 'left')
sim.mark_stage_complete(s, 1)
print('phase ticks:', PHASE_TICKS)
print('ST1 ticks', ticks[0], 'defects', sim.compute_defects(s))
print('  crease rms mm', {k: round(v * 1000, 1) for k, v in sim.crease_errors(s, 1).items()})

sim.score_stage(s, 2)
s = run_side_fold(s, 'right')
sim.mark_stage_complete(s, 2)
print('ST2 ticks', ticks[0], 'defects', sim.compute_defects(s))
print('  crease rms mm', {k: round(v * 1000, 1) for k, v in sim.crease_errors(s, 2).items()})
print('torn', s.chain.torn.sum(), np.where(s.chain.torn)[0])


def run_overhang_fold(s, side):
    """Sub-task 3 (left flap's far creases) or 4 (right flap's)."""
    sgn = 1.0 if side == 'left' else -1.0
    jend = 0 if side == 'left' else sim.config.segment_count
    ds = sim.config.segment_length
    # the far side for this flap is the opposite box face
    x_far = lay.box_x1 if side == 'left' else lay.box_x0
    corner3 = np.array([x_far, lay.box_y1])
    stage = 3 if side == 'left' else 4
    j_c3 = 10 if side == 'left' else sim.config.segment_count - 10

    sim.score_stage(s, stage)
    tape_prev = lay.fixate_joints[1 if side == 'left' else 2][0]
    sim.release_pin(s, tape_prev)   # peel the side-fold tape
    for _ in range(20):              # let the freed overhang spring back
        s, w = step(s, s.gripper_pose[:2].copy(), 0.04)

    tip = s.chain.joint_positions[jend].copy()
    PHASE[0] = 'oh-approach'
    s, w = transit(s, tip + [0, 0.05])
    s, w = grasp_joint(s, jend)
    jg = s.grasped_joint
    print('  grasped', jg)

    SOFT[0] = True
    PHASE[0] = 'oh-fold'
    r3 = abs(j_c3 - jg) * ds - 0.002
    phi_end = np.pi / 2 - sgn * (np.pi / 2 + np.radians(75))
    s, w = pinch_arc(s, corner3, r3, phi_end, settle=8)
    PHASE[0] = 'oh-tuck'
    ideal = folded_positions(sim.config, lay, stage)
    tip_goal = ideal[jend] + [0, 0.004]
    s, w = pinch_goto(s, tip_goal, timeout=220)
    PHASE[0] = 'oh-seat'
    s, w = press(s, [0, -1], 0.0, force=2.0, timeout=60)
    SOFT[0] = False
    PHASE[0] = 'oh-release'
    s, w = release_up(s)

    PHASE[0] = 'oh-press'
    for py in (0.040,):
        s, w = transit(s, [x_far + sgn * 0.14, py], tol=5e-3)
        s, w = press(s, [-sgn, 0], 0.04, force=2.5, timeout=140)
    # sharpen the far top corner while the tail can still feed slack
    s, w = transit(s, [x_far + sgn * 0.05, lay.box_y1 + 0.05], tol=5e-3)
    s, w = press(s, [-sgn, -1], 0.04, force=3.5, timeout=120)
    # press the tail flat and only then tape it
    s, w = transit(s, [x_far + sgn * 0.03, 0.05], tol=5e-3)
    s, w = press(s, [0, -1], 0.04, force=2.0)
    tape_j = lay.fixate_joints[stage][0]
    print('  tape joint', tape_j, 'at', s.chain.joint_positions[tape_j].round(4))
    sim.fixate(s, tape_j)
    return s


def run_close(s):
    """Sub-task 5: press both tails and tape the chain ends."""
    sim.score_stage(s, 5)
    n = sim.config.segment_count
    PHASE[0] = 'close'
    for side, sgn, jtip in (('left', 1.0, 0), ('right', -1.0, n)):
        x_far = lay.box_x1 if side == 'left' else lay.box_x0
        s, w = transit(s, [x_far + sgn * 0.028, 0.05], tol=5e-3)
        s, w = press(s, [0, -1], 0.04, force=2.5)
        tip = s.chain.joint_positions[jtip]
        s, w = goto(s, [tip[0], 0.045], 0.04, tol=5e-3, timeout=90)
        s, w = press(s, [0, -1], 0.04, force=2.0)
        sim.fixate(s, jtip)
    s, w = transit(s, [0.0, 0.30], tol=8e-3)
    return s


s = run_overhang_fold(s, 'left')
sim.mark_stage_complete(s, 3)
print('ST3 ticks', ticks[0], 'defects', sim.compute_defects(s))
print('  crease rms mm', {k: round(v * 1000, 1) for k, v in sim.crease_errors(s, 3).items()})

s = run_overhang_fold(s, 'right')
sim.mark_stage_complete(s, 4)
print('ST4 ticks', ticks[0], 'defects', sim.compute_defects(s))
print('  crease rms mm', {k: round(v * 1000, 1) for k, v in sim.crease_errors(s, 4).items()})

s = run_close(s)
sim.mark_stage_complete(s, 5)
print('ST5 ticks', ticks[0], 'defects', sim.compute_defects(s))
print('final torn', np.where(s.chain.torn)[0])
