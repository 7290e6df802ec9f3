"""Planar quasi-static paper simulator.

A hinge chain with elastic bending, peak-tracking plasticity, tensile tearing
and penalty contact against a table, a rigid box and a disc-shaped gripper.
Bending and inextensibility are solved as compliant position constraints
(stable for arbitrarily stiff paper); external forces move joints through an
overdamped step. Constraint multipliers provide per-segment tensions and the
grasp force, which in turn produce the synthetic force-torque reading.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .scenario import ScenarioLayout, build_layout, folded_positions, parse_scenario


class SimInstabilityError(RuntimeError):
    """Raised when integration produces non-finite state; reduce dt."""


@dataclass
class PaperChain:
    joint_positions: np.ndarray    # (n+1, 2) meters
    joint_angles: np.ndarray       # (n-1,) signed hinge turns, radians
    plastic_offsets: np.ndarray    # (n-1,) permanent crease set, radians
    tension: np.ndarray            # (n,) axial force per segment, N (low-passed)
    torn: np.ndarray               # (n,) bool
    peak_bend_pos: np.ndarray      # (n-1,) historical max turn (plasticity driver)
    peak_bend_neg: np.ndarray      # (n-1,) historical min turn

    def copy(self) -> "PaperChain":
        return PaperChain(*(f.copy() for f in (
            self.joint_positions, self.joint_angles, self.plastic_offsets,
            self.tension, self.torn, self.peak_bend_pos, self.peak_bend_neg)))


@dataclass
class WrenchReading:
    force: np.ndarray   # (3,) N; planar sim populates x, y
    torque: np.ndarray  # (3,) N.m; planar sim populates z

    @classmethod
    def zero(cls) -> "WrenchReading":
        return cls(np.zeros(3), np.zeros(3))

    @property
    def planar(self) -> np.ndarray:
        return self.force[:2]

    def copy(self) -> "WrenchReading":
        return WrenchReading(self.force.copy(), self.torque.copy())


@dataclass
class GripperCommand:
    force: np.ndarray        # (2,) N applied to the gripper body
    torque: float = 0.0      # N.m about z
    aperture: float = 0.04   # commanded opening, meters

    @classmethod
    def zero(cls, aperture: float = 0.04) -> "GripperCommand":
        return cls(np.zeros(2), 0.0, aperture)


@dataclass
class DefectScores:
    T: float
    W: float
    E: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.T, self.W, self.E)


@dataclass
class SimState:
    chain: PaperChain
    gripper_pose: np.ndarray       # (3,) x, y, yaw
    gripper_velocity: np.ndarray   # (2,) m/s
    gripper_aperture: float
    grasped_joint: int | None
    pins: dict[int, np.ndarray]    # taped/under-box joints -> world anchor
    contact_set: list[tuple[int, str, float]]
    completed_stages: set[int]     # sub-tasks whose creases count as intended
    time: float
    residual_force: float = 0.0    # effective residual at the last substep
    grasp_offset: np.ndarray | None = None   # pinch point relative to center
    _gripper_reaction: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def copy(self) -> "SimState":
        return SimState(
            chain=self.chain.copy(),
            gripper_pose=self.gripper_pose.copy(),
            gripper_velocity=self.gripper_velocity.copy(),
            gripper_aperture=self.gripper_aperture,
            grasped_joint=self.grasped_joint,
            pins={j: p.copy() for j, p in self.pins.items()},
            contact_set=list(self.contact_set),
            completed_stages=set(self.completed_stages),
            time=self.time,
            residual_force=self.residual_force,
            grasp_offset=None if self.grasp_offset is None else self.grasp_offset.copy(),
            _gripper_reaction=self._gripper_reaction.copy(),
        )


FEATURE_STATIONS = 16
FEATURE_DIM = 2 * FEATURE_STATIONS + 4 + 3 + 1 + 1 + 4  # 45


class Simulator:
    """Owns one scenario layout; single-threaded, state passed explicitly."""

    def __init__(self, config: SimConfig | None = None):
        self.config = config or SimConfig()
        self.layout: ScenarioLayout = build_layout(self.config)
        n = self.config.segment_count
        self._rest = self.config.segment_length
        seg = np.arange(n)
        self._seg_groups = [seg[seg % 2 == 0], seg[seg % 2 == 1]]
        hinge = np.arange(n - 1)
        self._hinge_groups = [hinge[hinge % 3 == k] for k in range(3)]
        self._gravity = np.array([0.0, -9.81]) * self.config.joint_mass
        self._paper_radius = self.config.paper_thickness / 2.0
        self._contact_net_force = np.zeros(2)

    # ------------------------------------------------------------------ reset

    def reset(self, scenario="full") -> SimState:
        """Canonical initial state for a scenario; prior-stage creases and
        tape pins are preloaded from the ideal layout and settled."""
        stage = parse_scenario(scenario)
        return self.reset_after(tuple(range(1, stage)))

    def reset_after(self, completed_stages) -> SimState:
        """Initial state with an arbitrary set of sub-tasks already folded
        (supports the alternative wrapping orders the planner can emit)."""
        cfg = self.config
        completed = set(int(s) for s in completed_stages)
        pos = folded_positions(cfg, self.layout, completed)

        nh = cfg.hinge_count
        offsets = np.zeros(nh)
        peak_pos = np.zeros(nh)
        peak_neg = np.zeros(nh)
        for crease in self.layout.creases_completed(completed):
            h = crease.hinge - 1
            offsets[h] = crease.turn
            if crease.turn > 0:
                peak_pos[h] = crease.turn / max(cfg.plastic_ratio, 1e-6) + cfg.yield_angle
            else:
                peak_neg[h] = crease.turn / max(cfg.plastic_ratio, 1e-6) - cfg.yield_angle

        chain = PaperChain(
            joint_positions=pos.astype(np.float64),
            joint_angles=np.zeros(nh),
            plastic_offsets=offsets,
            tension=np.zeros(cfg.segment_count),
            torn=np.zeros(cfg.segment_count, dtype=bool),
            peak_bend_pos=peak_pos,
            peak_bend_neg=peak_neg,
        )
        pins: dict[int, np.ndarray] = {
            int(j): pos[int(j)].copy() for j in self.layout.pinned_joints
        }
        for s in sorted(completed):
            for j in self.layout.fixate_joints.get(s, ()):
                pins[int(j)] = pos[int(j)].copy()

        state = SimState(
            chain=chain,
            gripper_pose=np.array(cfg.home_pose, dtype=np.float64),
            gripper_velocity=np.zeros(2),
            gripper_aperture=cfg.aperture_max,
            grasped_joint=None,
            pins=pins,
            contact_set=[],
            completed_stages=completed,
            time=0.0,
        )
        chain.joint_angles[:] = self._hinge_angles(chain.joint_positions)
        cmd = GripperCommand.zero(cfg.aperture_max)
        for i in range(400):
            self._substep(state, cmd)
            if i > 50 and state.residual_force < cfg.settle_force_tol:
                break
        state.chain.tension[:] = 0.0
        state.time = 0.0
        state._gripper_reaction[:] = 0.0
        return state

    # ------------------------------------------------------------------- step

    def step(self, state: SimState, command: GripperCommand,
             dt: float) -> tuple[SimState, WrenchReading]:
        """Advance by dt under a constant gripper command; quasi-static
        relaxation with the substep budget dt / substep_dt."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        if not (np.all(np.isfinite(command.force)) and np.isfinite(command.torque)
                and np.isfinite(command.aperture)):
            raise ValueError("command must be finite")
        state = state.copy()
        n_sub = max(1, int(round(dt / self.config.substep_dt)))
        sub_dt = dt / n_sub
        wrench_accum = np.zeros(2)
        for k in range(n_sub):
            reaction = self._substep(state, command, sub_dt, bookkeep=(k == n_sub - 1))
            wrench_accum += reaction
        state.time += dt
        if not np.all(np.isfinite(state.chain.joint_positions)):
            raise SimInstabilityError(
                f"non-finite joint positions at t={state.time:.3f}; reduce dt")
        reaction_mean = wrench_accum / n_sub
        reading = WrenchReading.zero()
        reading.force[:2] = -reaction_mean
        return state, reading

    # ------------------------------------------------------- pins and staging

    def fixate(self, state: SimState, joint: int) -> None:
        """Pin a joint at its current position (adhesive-tape abstraction)."""
        state.pins[int(joint)] = state.chain.joint_positions[int(joint)].copy()

    def score_stage(self, state: SimState, stage: int) -> None:
        """Pre-crease the fold lines of a sub-task: seed a small plastic bias
        at its crease hinges so subsequent folds localize there (models
        running a scoring pass along the box edges before folding)."""
        cfg = self.config
        chain = state.chain
        for crease in self.layout.creases_for_stage(stage):
            h = crease.hinge - 1
            bias = float(np.copysign(cfg.score_bias, crease.turn))
            if bias > 0 and chain.plastic_offsets[h] < bias:
                chain.peak_bend_pos[h] = max(chain.peak_bend_pos[h],
                                             bias / max(cfg.plastic_ratio, 1e-6)
                                             + cfg.yield_angle)
                chain.plastic_offsets[h] = bias
            elif bias < 0 and chain.plastic_offsets[h] > bias:
                chain.peak_bend_neg[h] = min(chain.peak_bend_neg[h],
                                             bias / max(cfg.plastic_ratio, 1e-6)
                                             - cfg.yield_angle)
                chain.plastic_offsets[h] = bias

    def release_pin(self, state: SimState, joint: int) -> None:
        state.pins.pop(int(joint), None)

    def mark_stage_complete(self, state: SimState, stage: int) -> None:
        state.completed_stages.add(int(stage))

    # ---------------------------------------------------------------- defects

    def compute_defects(self, state: SimState) -> DefectScores:
        """Ground-truth defect scores.

        T counts torn segments. W is the rms hinge curvature of panel
        interiors (crease regions excluded: a fold line occupies a few
        hinges). E is the positional deviation of the paper around each
        completed crease from the ideal folded layout, which captures both
        misplaced and badly angled folds.
        """
        cfg = self.config
        chain = state.chain
        torn_frac = float(chain.torn.sum()) / cfg.segment_count
        T = float(np.clip(cfg.tear_gain * torn_frac, 0.0, 1.0))

        hinge_idx = np.arange(1, cfg.segment_count)
        crease_hinges = self.layout.crease_hinges()
        near_crease = np.zeros(len(hinge_idx), dtype=bool)
        for c in crease_hinges:
            near_crease |= np.abs(hinge_idx - c) <= 2
        hinge_ok = ~(chain.torn[:-1] | chain.torn[1:])
        interior = ~near_crease & hinge_ok
        if interior.any():
            rms = float(np.sqrt(np.mean(chain.joint_angles[interior] ** 2)))
            W = float(np.clip((rms / cfg.wrinkle_norm) ** 2, 0.0, 1.0))
        else:
            W = 0.0

        errs = self._crease_position_errors(state, state.completed_stages)
        if errs:
            E = float(np.clip(np.mean(list(errs.values())) / cfg.edge_norm, 0.0, 1.0))
        else:
            E = 0.0
        return DefectScores(T=T, W=W, E=E)

    def _crease_position_errors(self, state: SimState, stages,
                                only_stage: int | None = None) -> dict[int, float]:
        """Per-crease rms distance (m) to the ideal layout with the given
        stages folded, over a window of joints around each crease."""
        stages = set(stages)
        creases = (self.layout.creases_for_stage(only_stage) if only_stage
                   else self.layout.creases_completed(stages))
        if not creases:
            return {}
        ideal = folded_positions(self.config, self.layout, stages)
        P = state.chain.joint_positions
        n = self.config.segment_count
        out = {}
        for c in creases:
            lo, hi = max(0, c.hinge - 3), min(n, c.hinge + 3)
            d = np.linalg.norm(P[lo:hi + 1] - ideal[lo:hi + 1], axis=1)
            out[int(c.hinge)] = float(np.sqrt(np.mean(d ** 2)))
        return out

    def crease_errors(self, state: SimState, stage: int) -> dict[int, float]:
        """Positional rms error (m) per crease of one stage, measured against
        the ideal layout with the currently completed stages plus this one."""
        stages = set(state.completed_stages) | {int(stage)}
        return self._crease_position_errors(state, stages, only_stage=stage)

    # --------------------------------------------------------------- features

    def privileged_features(self, state: SimState) -> np.ndarray:
        """Fixed-length state summary: FEATURE_DIM entries.

        Layout: 16 hinge-angle stations, 16 plastic-offset stations, both
        chain tips (4), gripper pose (3), aperture (1), grasp flag (1),
        contact summary (count/16, mean penetration in mm, net normal force
        x/10, y/10).
        """
        chain = state.chain
        nh = self.config.hinge_count
        stations = np.linspace(0, nh - 1, FEATURE_STATIONS).round().astype(int)
        pos = chain.joint_positions
        contact_n = len(state.contact_set)
        if contact_n:
            mean_pen = float(np.mean([c[2] for c in state.contact_set]))
        else:
            mean_pen = 0.0
        net = self._contact_net_force
        feats = np.concatenate([
            chain.joint_angles[stations],
            chain.plastic_offsets[stations],
            pos[0], pos[-1],
            state.gripper_pose,
            [state.gripper_aperture],
            [1.0 if state.grasped_joint is not None else 0.0],
            [contact_n / 16.0, mean_pen * 1e3, net[0] / 10.0, net[1] / 10.0],
        ])
        return feats.astype(np.float64)

    # ----------------------------------------------------------------- energy

    def energy(self, state: SimState) -> dict[str, float]:
        """Potential energy breakdown (elastic hinges, gravity, contact)."""
        cfg = self.config
        chain = state.chain
        hinge_ok = ~(chain.torn[:-1] | chain.torn[1:])
        bend = chain.joint_angles - chain.plastic_offsets
        elastic = 0.5 * cfg.bending_stiffness * float(np.sum((bend ** 2)[hinge_ok]))
        gravity = float(np.sum(cfg.joint_mass * 9.81 * chain.joint_positions[:, 1]))
        pen = self._paper_penetrations(chain.joint_positions)[0]
        contact = 0.5 * cfg.contact_stiffness * float(np.sum(pen ** 2))
        return {
            "elastic": elastic,
            "gravity": gravity,
            "contact": contact,
            "total": elastic + gravity + contact,
        }

    # ------------------------------------------------------------- primitives

    def _hinge_angles(self, P: np.ndarray) -> np.ndarray:
        D = P[1:] - P[:-1]
        a, b = D[:-1], D[1:]
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
        return np.arctan2(cross, dot)

    def _paper_penetrations(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-joint penetration depth and outward contact normal."""
        lay = self.layout
        r = self._paper_radius
        pen = np.zeros(len(P))
        normal = np.zeros_like(P)

        table = r - P[:, 1]
        mask = table > 0
        pen[mask] = table[mask]
        normal[mask] = (0.0, 1.0)

        xl, xr = lay.box_x0 - r, lay.box_x1 + r
        yb, yt = lay.box_y0 - r, lay.box_y1 + r
        inside = (P[:, 0] > xl) & (P[:, 0] < xr) & (P[:, 1] > yb) & (P[:, 1] < yt)
        if inside.any():
            idx = np.where(inside)[0]
            d = np.stack([P[idx, 0] - xl, xr - P[idx, 0],
                          P[idx, 1] - yb, yt - P[idx, 1]], axis=1)
            face = np.argmin(d, axis=1)
            depth = d[np.arange(len(idx)), face]
            face_normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
            deeper = depth > pen[idx]
            sel = idx[deeper]
            pen[sel] = depth[deeper]
            normal[sel] = face_normals[face[deeper]]
        return pen, normal

    def _gripper_environment_force(self, state: SimState) -> np.ndarray:
        """Penalty force on the gripper disc from the box and the table."""
        cfg = self.config
        lay = self.layout
        c = state.gripper_pose[:2]
        total = np.zeros(2)
        pen = cfg.gripper_radius - c[1]
        if pen > 0:
            total += cfg.contact_stiffness * pen * np.array([0.0, 1.0])
        q = np.array([np.clip(c[0], lay.box_x0, lay.box_x1),
                      np.clip(c[1], lay.box_y0, lay.box_y1)])
        delta = c - q
        d = float(np.linalg.norm(delta))
        if d > 1e-9:
            pen = cfg.gripper_radius - d
            if pen > 0:
                total += cfg.contact_stiffness * pen * (delta / d)
        else:
            dists = np.array([c[0] - lay.box_x0, lay.box_x1 - c[0],
                              c[1] - lay.box_y0, lay.box_y1 - c[1]])
            face = int(np.argmin(dists))
            normals = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])
            total += cfg.contact_stiffness * (dists[face] + cfg.gripper_radius) * normals[face]
        return total

    # ---------------------------------------------------------------- substep

    def _substep(self, state: SimState, command: GripperCommand,
                 dt: float | None = None, bookkeep: bool = True) -> np.ndarray:
        """One relaxation substep; returns the low-passed gripper reaction."""
        cfg = self.config
        if dt is None:
            dt = cfg.substep_dt
        chain = state.chain
        P = chain.joint_positions
        n = cfg.segment_count

        # aperture and grasp bookkeeping
        a_err = np.clip(command.aperture, cfg.aperture_min, cfg.aperture_max) \
            - state.gripper_aperture
        state.gripper_aperture += float(np.clip(a_err, -cfg.aperture_rate * dt,
                                                cfg.aperture_rate * dt))
        tip = state.gripper_pose[:2]
        if state.gripper_aperture < cfg.grasp_threshold:
            if state.grasped_joint is None:
                d = np.linalg.norm(P - tip, axis=1)
                for j in state.pins:  # taped or under-box joints cannot be grasped
                    d[j] = np.inf
                j = int(np.argmin(d))
                if d[j] < cfg.grasp_radius:
                    state.grasped_joint = j
                    # pinch the paper where it is instead of snapping it to
                    # the gripper center
                    state.grasp_offset = P[j] - tip
        else:
            state.grasped_joint = None
            state.grasp_offset = None

        # gripper body: overdamped under command + low-passed reaction
        f_g = command.force + state._gripper_reaction
        v_g = f_g / cfg.gripper_drag
        speed = float(np.linalg.norm(v_g))
        if speed > cfg.gripper_max_speed:
            v_g = v_g * (cfg.gripper_max_speed / speed)
        state.gripper_pose[:2] += v_g * dt
        state.gripper_pose[2] += (command.torque / cfg.gripper_rot_drag) * dt
        state.gripper_velocity = v_g.copy()
        tip = state.gripper_pose[:2]

        P_start = P.copy()
        reaction = np.zeros(2)

        # external forces: gravity and penalty contact
        F = np.tile(self._gravity, (n + 1, 1))
        pen, normal = self._paper_penetrations(P)
        contacting = pen > 0
        f_contact = np.zeros_like(P)
        if contacting.any():
            f_contact[contacting] = (cfg.contact_stiffness * pen[contacting])[:, None] \
                * normal[contacting]

        d = P - tip
        dist = np.linalg.norm(d, axis=1)
        rsum = cfg.gripper_radius + self._paper_radius
        gmask = (dist < rsum) & (dist > 1e-9)
        if state.grasped_joint is not None:
            gmask[state.grasped_joint] = False
        if gmask.any():
            nrm = d[gmask] / dist[gmask][:, None]
            fg = (cfg.contact_stiffness * (rsum - dist[gmask]))[:, None] * nrm
            f_contact[gmask] += fg
            reaction -= fg.sum(axis=0)
        F += f_contact

        reaction += self._gripper_environment_force(state)

        # overdamped force step; contacting joints get extra drag
        free = np.ones(n + 1, dtype=bool)
        if state.pins:
            pin_idx = np.fromiter(state.pins.keys(), dtype=int)
            pin_pos = np.array([state.pins[int(j)] for j in pin_idx]).reshape(-1, 2)
            free[pin_idx] = False
        else:
            pin_idx = np.empty(0, dtype=int)
            pin_pos = np.empty((0, 2))
        drag = np.full(n + 1, cfg.paper_drag)
        drag[contacting] += cfg.contact_damping
        P[free] += (dt / drag[free])[:, None] * F[free]

        # compliant constraint projection; dtc sets the pseudo-time of the
        # relaxation (quasi-static: constraints equilibrate faster than dt)
        dtc = cfg.constraint_dt
        lam_len = np.zeros(n)
        lam_bend = np.zeros(n - 1)
        lam_grasp = np.zeros(2)
        a_len = cfg.axial_compliance / (dtc * dtc)
        a_bend = (1.0 / cfg.bending_stiffness) / (dtc * dtc)
        a_pin = cfg.pin_compliance / (dtc * dtc)
        inv_w = free.astype(np.float64)
        seg_active = ~chain.torn
        hinge_active = ~(chain.torn[:-1] | chain.torn[1:])
        if pin_idx.size:
            P[pin_idx] = pin_pos

        x = P[:, 0].copy()
        y = P[:, 1].copy()
        offs = chain.plastic_offsets
        grasp_j = state.grasped_joint if (state.grasped_joint is not None
                                          and free[state.grasped_joint]) else None
        if grasp_j is not None:
            pinch = tip + (state.grasp_offset if state.grasp_offset is not None else 0.0)

        # parity/color groups are strided slices; torn constraints are masked
        # out through the multiplier factor instead of index filtering
        seg_slices = []
        for p in (0, 1):
            sl_i = slice(p, n, 2)
            sl_i1 = slice(p + 1, n + 1, 2)
            seg_slices.append((sl_i, sl_i1, seg_active[sl_i].astype(np.float64)))
        hinge_slices = []
        for c in (0, 1, 2):
            sl = slice(c, n - 1, 3)
            hinge_slices.append((sl, slice(c + 1, n, 3), slice(c + 2, n + 1, 3),
                                 hinge_active[sl].astype(np.float64)))
        if pin_idx.size:
            pin_x = pin_pos[:, 0].copy()
            pin_y = pin_pos[:, 1].copy()

        for _ in range(cfg.constraint_sweeps):
            for sl_i, sl_i1, act in seg_slices:
                ddx = x[sl_i1] - x[sl_i]
                ddy = y[sl_i1] - y[sl_i]
                ell = np.sqrt(ddx * ddx + ddy * ddy)
                np.maximum(ell, 1e-12, out=ell)
                w1 = inv_w[sl_i]
                w2 = inv_w[sl_i1]
                dlam = act * (self._rest - ell - a_len * lam_len[sl_i]) \
                    / (w1 + w2 + a_len)
                lam_len[sl_i] += dlam
                sc = dlam / ell
                x[sl_i] -= w1 * sc * ddx
                y[sl_i] -= w1 * sc * ddy
                x[sl_i1] += w2 * sc * ddx
                y[sl_i1] += w2 * sc * ddy

            for sl0, sl1, sl2, act in hinge_slices:
                x0 = x[sl0]; y0 = y[sl0]
                x1 = x[sl1]; y1 = y[sl1]
                x2 = x[sl2]; y2 = y[sl2]
                ax = x1 - x0
                ay = y1 - y0
                bx = x2 - x1
                by = y2 - y1
                cr = ax * by - ay * bx
                dd = ax * bx + ay * by
                r2 = cr * cr + dd * dd
                np.maximum(r2, 1e-24, out=r2)
                C = np.arctan2(cr, dd) - offs[sl0]
                inv = 1.0 / r2
                gax = (dd * by - cr * bx) * inv
                gay = (-dd * bx - cr * by) * inv
                gbx = (-dd * ay - cr * ax) * inv
                gby = (dd * ax - cr * ay) * inv
                g1x = gax - gbx
                g1y = gay - gby
                w0 = inv_w[sl0]
                w1 = inv_w[sl1]
                w2 = inv_w[sl2]
                denom = (w0 * (gax * gax + gay * gay)
                         + w1 * (g1x * g1x + g1y * g1y)
                         + w2 * (gbx * gbx + gby * gby) + a_bend)
                dlam = act * (-C - a_bend * lam_bend[sl0]) / denom
                lam_bend[sl0] += dlam
                x[sl0] -= w0 * dlam * gax
                y[sl0] -= w0 * dlam * gay
                x[sl1] += w1 * dlam * g1x
                y[sl1] += w1 * dlam * g1y
                x[sl2] += w2 * dlam * gbx
                y[sl2] += w2 * dlam * gby

            if grasp_j is not None:
                cx = x[grasp_j] - pinch[0]
                cy = y[grasp_j] - pinch[1]
                wj = inv_w[grasp_j]
                dlx = (-cx - a_pin * lam_grasp[0]) / (wj + a_pin)
                dly = (-cy - a_pin * lam_grasp[1]) / (wj + a_pin)
                lam_grasp[0] += dlx
                lam_grasp[1] += dly
                x[grasp_j] += wj * dlx
                y[grasp_j] += wj * dly

            if pin_idx.size:
                x[pin_idx] = pin_x
                y[pin_idx] = pin_y

        P[:, 0] = x
        P[:, 1] = y

        # positional friction: cancel tangential slip up to mu * penetration
        pen2, normal2 = self._paper_penetrations(P)
        slip_mask = (pen2 > 0) & contacting & free
        if state.grasped_joint is not None:
            slip_mask[state.grasped_joint] = False
        if slip_mask.any():
            disp = P[slip_mask] - P_start[slip_mask]
            nrm = normal2[slip_mask]
            d_t = disp - np.sum(disp * nrm, axis=1)[:, None] * nrm
            mag = np.linalg.norm(d_t, axis=1)
            cap = cfg.friction_coefficient * pen2[slip_mask]
            scale = np.where(mag > 1e-12, np.minimum(1.0, cap / np.maximum(mag, 1e-12)), 0.0)
            P[slip_mask] -= d_t * scale[:, None]

        # tensions: low-passed so single-substep solver transients do not
        # register as tearing loads; positive tension = stretched segment
        inst = np.where(seg_active, -lam_len / (dtc * dtc), 0.0)
        chain.tension[:] = np.where(seg_active, 0.9 * chain.tension + 0.1 * inst, 0.0)
        tearing = seg_active & (chain.tension > cfg.tear_tension)
        if tearing.any():
            chain.torn |= tearing
            chain.tension[tearing] = 0.0
        if state.grasped_joint is not None:
            reaction += -lam_grasp / (dtc * dtc)

        # plasticity: peak-excursion tracking
        theta = self._hinge_angles(P)
        chain.joint_angles[:] = theta
        hinge_ok = ~(chain.torn[:-1] | chain.torn[1:])
        np.maximum(chain.peak_bend_pos, np.where(hinge_ok, theta, chain.peak_bend_pos),
                   out=chain.peak_bend_pos)
        np.minimum(chain.peak_bend_neg, np.where(hinge_ok, theta, chain.peak_bend_neg),
                   out=chain.peak_bend_neg)
        y = cfg.yield_angle
        chain.plastic_offsets[:] = cfg.plastic_ratio * (
            np.maximum(chain.peak_bend_pos - y, 0.0)
            - np.maximum(-chain.peak_bend_neg - y, 0.0))

        # effective residual: how fast the paper is still reconfiguring
        if free.any():
            move = np.linalg.norm(P[free] - P_start[free], axis=1)
            state.residual_force = float(move.max() / dt * cfg.paper_drag)
        else:
            state.residual_force = 0.0

        if bookkeep:
            state.contact_set = []
            for j in np.where(pen2 > 0)[0]:
                surface = "table" if P[j, 1] < self.layout.box_y0 else "box"
                state.contact_set.append((int(j), surface, float(pen2[j])))
            if gmask.any():
                for j in np.where(gmask)[0]:
                    state.contact_set.append((int(j), "gripper", float(rsum - dist[j])))
            self._contact_net_force = f_contact.sum(axis=0)

        # wrist-compliance low-pass decouples the stiff pin from the body
        beta = cfg.reaction_smoothing
        state._gripper_reaction = (1.0 - beta) * state._gripper_reaction + beta * reaction
        return state._gripper_reaction.copy()
