"""Deterministic rasterization of the planar scene to small RGB images.

Two views mirror the dual-camera setup: "side" is scene-fixed, "wrist" is
centered on the gripper so pure gripper translation over an empty background
leaves the image unchanged.
"""

from __future__ import annotations

import numpy as np

from .core import SimState, Simulator

BACKGROUND = np.array([24, 24, 28], dtype=np.uint8)
PAPER = np.array([235, 235, 235], dtype=np.uint8)
BOX = np.array([184, 128, 72], dtype=np.uint8)
GRIPPER = np.array([90, 160, 220], dtype=np.uint8)

SIDE_CENTER = (0.0, 0.20)
SIDE_HALF = 0.25
WRIST_HALF = 0.10

VIEWS = ("wrist", "side")


def _world_to_px(points: np.ndarray, center: tuple[float, float],
                 half: float, size: int) -> np.ndarray:
    """Map world xy to integer pixel rows/cols (row 0 is the top)."""
    scale = size / (2.0 * half)
    cols = np.floor((points[:, 0] - (center[0] - half)) * scale).astype(int)
    rows = np.floor(((center[1] + half) - points[:, 1]) * scale).astype(int)
    return np.stack([rows, cols], axis=1)


def _paint(img: np.ndarray, px: np.ndarray, color: np.ndarray) -> None:
    size = img.shape[0]
    ok = (px[:, 0] >= 0) & (px[:, 0] < size) & (px[:, 1] >= 0) & (px[:, 1] < size)
    img[px[ok, 0], px[ok, 1]] = color


def render_observation(sim: Simulator, state: SimState, view: str,
                       size: int = 64) -> np.ndarray:
    """Rasterize box, paper chain and gripper; deterministic per state."""
    if view not in VIEWS:
        raise KeyError(f"unknown view {view!r}; expected one of {VIEWS}")
    if view == "side":
        center = SIDE_CENTER
        half = SIDE_HALF
    else:
        center = (float(state.gripper_pose[0]), float(state.gripper_pose[1]))
        half = WRIST_HALF

    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = BACKGROUND

    lay = sim.layout
    scale = size / (2.0 * half)

    # box as a filled rectangle
    c0 = int(np.floor((lay.box_x0 - (center[0] - half)) * scale))
    c1 = int(np.ceil((lay.box_x1 - (center[0] - half)) * scale))
    r0 = int(np.floor(((center[1] + half) - lay.box_y1) * scale))
    r1 = int(np.ceil(((center[1] + half) - lay.box_y0) * scale))
    c0, c1 = max(c0, 0), min(c1, size)
    r0, r1 = max(r0, 0), min(r1, size)
    if c0 < c1 and r0 < r1:
        img[r0:r1, c0:c1] = BOX

    # paper: sample each segment densely enough to cover every crossed pixel
    P = state.chain.joint_positions
    samples_per_seg = max(2, int(np.ceil(sim.config.segment_length * scale * 2)))
    ts = np.linspace(0.0, 1.0, samples_per_seg)
    seg_ok = ~state.chain.torn
    a = P[:-1][seg_ok]
    b = P[1:][seg_ok]
    pts = (a[:, None, :] * (1.0 - ts)[None, :, None]
           + b[:, None, :] * ts[None, :, None]).reshape(-1, 2)
    _paint(img, _world_to_px(pts, center, half, size), PAPER)

    # gripper disc
    g = state.gripper_pose[:2]
    rad_px = max(1, int(round(sim.config.gripper_radius * scale)))
    gpx = _world_to_px(g[None, :], center, half, size)[0]
    rr, cc = np.mgrid[-rad_px:rad_px + 1, -rad_px:rad_px + 1]
    disc = rr ** 2 + cc ** 2 <= rad_px ** 2
    rows = gpx[0] + rr[disc]
    cols = gpx[1] + cc[disc]
    ok = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size)
    img[rows[ok], cols[ok]] = GRIPPER
    return img
