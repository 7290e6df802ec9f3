"""Desired contact-force reference recovered from demonstration statistics."""

from __future__ import annotations

import numpy as np

from ..demos.dataset import DatasetManifest, load_demo_arrays
from ..demos.expert import PHASES


def desired_force_profile(subtask: int, manifest: DatasetManifest) -> dict[str, float]:
    """Per-phase mean demo force for one sub-task (free-space phases come
    out near zero on their own). Raises KeyError when the dataset carries no
    such sub-task."""
    out: dict[str, float] = {}
    found = False
    for key, entry in manifest.force_stats.items():
        sid, phase = key.split(":")
        if int(sid) != subtask:
            continue
        found = True
        out[phase] = float(entry["mean_force"])
    if not found:
        raise KeyError(f"no demo statistics for sub-task {subtask}")
    return out


def time_binned_profile(subtask: int, manifest: DatasetManifest,
                        bins: int = 24, verify: bool = False) -> np.ndarray:
    """Mean |planar force| versus normalized sub-task progress, for use as
    the rollout-time force reference f_desired(t)."""
    sums = np.zeros(bins)
    counts = np.zeros(bins)
    for rec in manifest.demos:
        if rec.scenario != subtask:
            continue
        arrays = load_demo_arrays(manifest, rec, fields=("wrench", "phase"),
                                  verify=verify)
        mags = np.linalg.norm(arrays["wrench"][:, :2], axis=1)
        T = len(mags)
        pos = np.minimum((np.arange(T) * bins) // max(T, 1), bins - 1)
        np.add.at(sums, pos, mags)
        np.add.at(counts, pos, 1)
    if counts.sum() == 0:
        raise KeyError(f"no demo statistics for sub-task {subtask}")
    return sums / np.maximum(counts, 1)


def force_reference_at(profile: np.ndarray, tick: int, expected_ticks: int) -> float:
    frac = min(max(tick, 0) / max(expected_ticks, 1), 0.999)
    return float(profile[int(frac * len(profile))])
