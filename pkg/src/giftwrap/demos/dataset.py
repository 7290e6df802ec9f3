"""On-disk demonstration datasets: columnar per-demo arrays with a manifest.

Layout: every demo gets a directory demo_NNNN/ holding one little-endian .npy
per field; the dataset root carries manifest.json with per-demo entries,
SHA256 checksums and per-phase force statistics. Fields and dtypes:

    features     float64 (T, FEATURE_DIM)
    robot_state  float64 (T, 4)      gripper x, y, yaw, aperture
    wrench       float64 (T, 6)      fx fy fz tx ty tz
    actions      float64 (T, 10)     p(3) rot6d(6) gripper(1)
    subtask      uint16  (T,)
    transition   uint8   (T,)        exactly one 1, at the terminal frame
    phase        uint16  (T,)        index into expert.PHASES
    images       uint8   (T, 2, H, W, 3)   optional

Timestamps are implicit: frame k is at k / 40 s.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .expert import CONTACT_PHASES, PHASES, Frame

SCHEMA_VERSION = 1
CONTROL_RATE = 40.0


ORDERINGS = ([1, 2, 3, 4, 5], [1, 3, 2, 4, 5], [2, 4, 1, 3, 5])


@dataclass
class DemoRecord:
    name: str
    scenario: int
    seed: int
    frames: int
    checksums: dict[str, str]
    completed: list[int] = None


@dataclass
class DatasetManifest:
    root: str
    schema_version: int
    demos: list[DemoRecord]
    force_stats: dict[str, dict[str, float]]

    @property
    def count(self) -> int:
        return len(self.demos)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def frames_to_arrays(frames: list[Frame]) -> dict[str, np.ndarray]:
    out = {
        "features": np.stack([f.features for f in frames]).astype("<f8"),
        "robot_state": np.stack([f.robot_state for f in frames]).astype("<f8"),
        "wrench": np.stack([f.wrench for f in frames]).astype("<f8"),
        "actions": np.stack([f.action for f in frames]).astype("<f8"),
        "subtask": np.array([f.subtask for f in frames], dtype="<u2"),
        "transition": np.array([f.transition for f in frames], dtype="u1"),
        "phase": np.array([f.phase for f in frames], dtype="<u2"),
    }
    if frames[0].images is not None:
        out["images"] = np.stack([np.stack(f.images) for f in frames]).astype("u1")
    return out


def save_demo(root: str, index: int, frames: list[Frame], scenario: int,
              seed: int, completed: list[int] | None = None) -> DemoRecord:
    name = f"demo_{index:04d}"
    path = os.path.join(root, name)
    os.makedirs(path, exist_ok=True)
    arrays = frames_to_arrays(frames)
    checksums = {}
    for field, arr in arrays.items():
        fp = os.path.join(path, field + ".npy")
        np.save(fp, arr)
        checksums[field] = _sha256(fp)
    return DemoRecord(name=name, scenario=scenario, seed=seed,
                      frames=len(frames), checksums=checksums,
                      completed=list(completed or []))


def compute_force_stats(records_arrays) -> dict[str, dict[str, float]]:
    """Mean |force| per (sub-task, phase) over the dataset; feeds the desired
    force profile of the residual agent."""
    sums: dict[tuple[int, int], list[float]] = {}
    for arrays in records_arrays:
        mags = np.linalg.norm(arrays["wrench"][:, :2], axis=1)
        for st, ph in set(zip(arrays["subtask"].tolist(), arrays["phase"].tolist())):
            mask = (arrays["subtask"] == st) & (arrays["phase"] == ph)
            sums.setdefault((int(st), int(ph)), []).extend(mags[mask].tolist())
    out: dict[str, dict[str, float]] = {}
    for (st, ph), vals in sorted(sums.items()):
        key = f"{st}:{PHASES[ph]}"
        out[key] = {
            "mean_force": float(np.mean(vals)),
            "count": len(vals),
            "contact": PHASES[ph] in CONTACT_PHASES,
        }
    return out


def write_manifest(root: str, records: list[DemoRecord],
                   force_stats: dict) -> None:
    data = {
        "schema_version": SCHEMA_VERSION,
        "control_rate_hz": CONTROL_RATE,
        "demos": [
            {"name": r.name, "scenario": r.scenario, "seed": r.seed,
             "frames": r.frames, "checksums": r.checksums,
             "completed": r.completed}
            for r in records
        ],
        "force_stats": force_stats,
    }
    with open(os.path.join(root, "manifest.json"), "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(root: str) -> DatasetManifest:
    with open(os.path.join(root, "manifest.json")) as fh:
        data = json.load(fh)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"dataset schema version {data.get('schema_version')} "
                         f"!= supported {SCHEMA_VERSION}")
    demos = [DemoRecord(name=d["name"], scenario=d["scenario"], seed=d["seed"],
                        frames=d["frames"], checksums=d["checksums"],
                        completed=d.get("completed", []))
             for d in data["demos"]]
    return DatasetManifest(root=root, schema_version=data["schema_version"],
                           demos=demos, force_stats=data.get("force_stats", {}))


def load_demo_arrays(manifest: DatasetManifest, record: DemoRecord,
                     fields: tuple[str, ...] | None = None,
                     verify: bool = True) -> dict[str, np.ndarray]:
    path = os.path.join(manifest.root, record.name)
    out = {}
    names = fields or tuple(record.checksums)
    for field in names:
        fp = os.path.join(path, field + ".npy")
        if verify:
            digest = _sha256(fp)
            if digest != record.checksums[field]:
                raise IOError(f"checksum mismatch for {fp}")
        out[field] = np.load(fp)
    return out


def generate_dataset(sim_factory, root: str, counts: dict[int, int],
                     expert_config, base_seed: int = 0,
                     record_images: bool = False, render_fn=None,
                     progress=None) -> DatasetManifest:
    """Generate and persist scripted demos; counts maps sub-task id -> n."""
    from .expert import generate_demo

    os.makedirs(root, exist_ok=True)
    sim = sim_factory()
    records = []
    all_arrays = []
    index = 0
    for stage in sorted(counts):
        if counts[stage] < 1:
            raise ValueError("demo counts must be >= 1")
        for k in range(counts[stage]):
            seed = base_seed + 1000 * stage + k
            # rotate through the wrapping orders the planner can emit so the
            # policy sees identical states continued by different sub-tasks
            order = ORDERINGS[k % len(ORDERINGS)]
            completed = order[: order.index(stage)]
            _, frames, _ = generate_demo(
                sim, stage, expert_config, seed=seed,
                record_images=record_images, render_fn=render_fn,
                completed=completed)
            rec = save_demo(root, index, frames, scenario=stage, seed=seed,
                            completed=completed)
            records.append(rec)
            all_arrays.append(frames_to_arrays(frames))
            index += 1
            if progress:
                progress(stage, k, len(frames))
    stats = compute_force_stats(all_arrays)
    write_manifest(root, records, stats)
    return load_manifest(root)


@dataclass
class WindowDataset:
    """Training windows over loaded demos: (features/robot/wrench/subtask at
    t, action chunk t..t+H-1, transition chunk, padding mask)."""

    features: list[np.ndarray]
    robot_state: list[np.ndarray]
    wrench: list[np.ndarray]
    subtask: list[np.ndarray]
    actions: list[np.ndarray]
    transition: list[np.ndarray]
    images: list[np.ndarray] | None
    chunk: int
    index: list[tuple[int, int]]  # (demo, t)

    def __len__(self) -> int:
        return len(self.index)

    def sample(self, i: int) -> dict:
        d, t = self.index[i]
        T = len(self.actions[d])
        hi = min(t + self.chunk, T)
        acts = self.actions[d][t:hi]
        flags = self.transition[d][t:hi]
        pad = self.chunk - (hi - t)
        mask = np.ones(self.chunk, dtype=bool)
        if pad:
            # hold the terminal action; mask the padded tail
            acts = np.concatenate([acts, np.repeat(acts[-1:], pad, axis=0)])
            flags = np.concatenate([flags, np.repeat(flags[-1:], pad)])
            mask[self.chunk - pad:] = False
        out = {
            "features": self.features[d][t],
            "robot_state": self.robot_state[d][t],
            "wrench": self.wrench[d][t],
            "subtask": int(self.subtask[d][t]),
            "actions": acts,
            "transition": flags.astype(np.float64),
            "mask": mask,
        }
        if self.images is not None:
            out["images"] = self.images[d][t]
        return out


def load_dataset(manifest: DatasetManifest, chunk: int,
                 with_images: bool = False, verify: bool = True,
                 scenarios: tuple[int, ...] | None = None) -> WindowDataset:
    feats, robots, wrenches, subs, acts, trans = [], [], [], [], [], []
    images = [] if with_images else None
    index = []
    d = 0
    for rec in manifest.demos:
        if scenarios is not None and rec.scenario not in scenarios:
            continue
        fields = ("features", "robot_state", "wrench", "subtask",
                  "actions", "transition")
        if with_images:
            fields = fields + ("images",)
        arrays = load_demo_arrays(manifest, rec, fields=fields, verify=verify)
        feats.append(arrays["features"])
        robots.append(arrays["robot_state"])
        wrenches.append(arrays["wrench"])
        subs.append(arrays["subtask"])
        acts.append(arrays["actions"])
        trans.append(arrays["transition"])
        if with_images:
            images.append(arrays["images"])
        T = len(arrays["actions"])
        index.extend((d, t) for t in range(T))
        d += 1
    if not index:
        raise ValueError("empty dataset")
    return WindowDataset(feats, robots, wrenches, subs, acts, trans, images,
                         chunk, index)
