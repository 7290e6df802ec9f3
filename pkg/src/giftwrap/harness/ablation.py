"""Ablation suite and the unified-vs-modular comparison.

Variants share environment seeds exactly (matched-seed batches); gaps are
tested with a paired sign-flip permutation test. Episode batches parallelize
across worker processes, one simulator instance each.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..planner.compiler import ExecutablePlan
from ..policy.runtime import load_checkpoint
from ..residual.sac import SACAgent
from ..sim.config import SimConfig
from ..sim.core import Simulator
from .episode import EpisodeOptions, EpisodeResult, run_episode

VARIANTS = ("full", "no_subtask_id", "no_ft_input", "manual_transition",
            "position_only", "no_residual", "modular")


@dataclass
class AblationSpec:
    variants: tuple[str, ...]
    episodes: int = 50
    seeds: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}; known: {VARIANTS}")
        if self.episodes < 1:
            raise ValueError("episode count must be >= 1")

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)[: self.episodes]
        return list(range(self.episodes))


@dataclass
class VariantArtifacts:
    """Checkpoint paths per variant; missing entries are reported upfront."""
    unified: str
    no_subtask_id: str | None = None
    no_ft_input: str | None = None
    modular: dict[int, str] | None = None
    residual: str | None = None

    def for_variant(self, variant: str) -> list[str]:
        need = [self.unified]
        if variant == "no_subtask_id":
            need = [self.no_subtask_id or ""]
        elif variant == "no_ft_input":
            need = [self.no_ft_input or ""]
        elif variant == "modular":
            need = list((self.modular or {}).values()) or [""]
        if variant in ("full", "no_subtask_id", "no_ft_input",
                       "manual_transition", "modular") and self.residual:
            need.append(self.residual)
        return need


@dataclass
class VariantSummary:
    variant: str
    episodes: int
    success_rate: float
    mean_pi: float
    mean_force: float
    peak_force: float
    mean_duration: float
    timeout_rate: float
    per_seed_success: list[int]
    per_seed_pi: list[float]
    per_seed_force: list[float]
    per_seed_peak: list[float]
    boundary_failures: int = 0
    trace_hash: str = ""


def _episode_noise(sim: Simulator, seed: int) -> None:
    """Matched-seed environment variation: small per-episode changes to the
    paper's bending stiffness and the friction coefficient."""
    rng = np.random.default_rng(seed)
    sim.config.bending_stiffness *= float(rng.uniform(0.85, 1.15))
    sim.config.friction_coefficient = float(
        np.clip(sim.config.friction_coefficient * rng.uniform(0.85, 1.15),
                0.1, 0.9))


def _pre_policy_stream_hash(seed: int, config: SimConfig) -> str:
    """Trace hash of the seed-derived environment stream, used to verify that
    matched-seed batches share environments exactly."""
    sim = Simulator(config)
    _episode_noise(sim, seed)
    state = sim.reset("full")
    h = hashlib.sha256()
    h.update(np.float64(sim.config.bending_stiffness).tobytes())
    h.update(np.float64(sim.config.friction_coefficient).tobytes())
    h.update(state.chain.joint_positions.tobytes())
    return h.hexdigest()[:16]


def run_one_episode(variant: str, seed: int, plan: ExecutablePlan,
                    artifacts: VariantArtifacts,
                    force_profiles, expected_ticks,
                    base_config: SimConfig | None = None) -> dict:
    """One matched-seed episode of one variant (worker-safe)."""
    config = base_config or SimConfig()
    sim = Simulator(SimConfig(**{**config.__dict__}))
    _episode_noise(sim, seed)
    opts = EpisodeOptions()
    agent = SACAgent.load(artifacts.residual) if artifacts.residual else None

    if variant == "modular":
        policy = {sid: load_checkpoint(p) for sid, p in artifacts.modular.items()}
    elif variant == "no_subtask_id":
        policy = load_checkpoint(artifacts.no_subtask_id)
    elif variant == "no_ft_input":
        policy = load_checkpoint(artifacts.no_ft_input)
    else:
        policy = load_checkpoint(artifacts.unified)

    if variant == "manual_transition":
        opts.manual_transition = True
    if variant == "position_only":
        opts.stiff_position_only = True
        opts.use_residual = False
        agent = None
    if variant == "no_residual":
        opts.use_residual = False
        agent = None

    result = run_episode(sim, plan, policy, agent=agent, options=opts,
                         force_profiles=force_profiles,
                         expected_ticks=expected_ticks)
    boundary = _boundary_failure(result)
    return {
        "variant": variant, "seed": seed,
        "success": int(result.success), "pi": result.pi,
        "mean_force": result.mean_force, "peak_force": result.peak_force,
        "duration": result.duration_s, "timeouts": result.timeouts,
        "boundary_failure": int(boundary),
        "trace_hash": _pre_policy_stream_hash(seed, sim.config),
        "per_subtask": {k: int(v) for k, v in result.per_subtask.items()},
    }


def _boundary_failure(result: EpisodeResult) -> bool:
    """A failed episode whose first failing sub-task immediately follows a
    successful one (the error concentrates at the switch)."""
    if result.success:
        return False
    order = sorted(result.per_subtask)
    prev_ok = True
    for sid in order:
        if not result.per_subtask[sid]:
            return prev_ok
        prev_ok = result.per_subtask[sid]
    return False


def summarize(variant: str, rows: list[dict]) -> VariantSummary:
    return VariantSummary(
        variant=variant, episodes=len(rows),
        success_rate=float(np.mean([r["success"] for r in rows])),
        mean_pi=float(np.mean([r["pi"] for r in rows])),
        mean_force=float(np.mean([r["mean_force"] for r in rows])),
        peak_force=float(np.mean([r["peak_force"] for r in rows])),
        mean_duration=float(np.mean([r["duration"] for r in rows])),
        timeout_rate=float(np.mean([r["timeouts"] > 0 for r in rows])),
        per_seed_success=[r["success"] for r in rows],
        per_seed_pi=[r["pi"] for r in rows],
        per_seed_force=[r["mean_force"] for r in rows],
        per_seed_peak=[r["peak_force"] for r in rows],
        boundary_failures=sum(r["boundary_failure"] for r in rows),
        trace_hash=hashlib.sha256(
            "".join(r["trace_hash"] for r in rows).encode()).hexdigest()[:16],
    )


def paired_permutation_p(a, b, n_resamples: int = 10000, seed: int = 0) -> float:
    """One-sided sign-flip permutation test for mean(a) > mean(b) on paired
    samples."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b
    observed = d.mean()
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(n_resamples, len(d)))
    null = (signs * d).mean(axis=1)
    return float((np.sum(null >= observed) + 1) / (n_resamples + 1))


def run_ablation(spec: AblationSpec, plan: ExecutablePlan,
                 artifacts: VariantArtifacts,
                 force_profiles=None, expected_ticks=None,
                 base_config: SimConfig | None = None,
                 workers: int | None = None,
                 progress=None) -> dict[str, VariantSummary]:
    """Matched-seed episode batches per variant; missing artifacts are named
    before anything runs."""
    missing = []
    for v in spec.variants:
        for path in artifacts.for_variant(v):
            if not path or not os.path.exists(path):
                missing.append(f"{v}: {path or '<unset>'}")
    if missing:
        raise FileNotFoundError("missing artifacts: " + "; ".join(missing))

    seeds = spec.seed_list()
    jobs = [(v, s) for v in spec.variants for s in seeds]
    rows: dict[str, list[dict]] = {v: [] for v in spec.variants}
    workers = workers if workers is not None else min(os.cpu_count() or 1, 2)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(run_one_episode, v, s, plan, artifacts,
                            force_profiles, expected_ticks, base_config): (v, s)
                for v, s in jobs
            }
            for fut, (v, s) in futures.items():
                rows[v].append(fut.result())
                if progress:
                    progress(v, s)
    else:
        for v, s in jobs:
            rows[v].append(run_one_episode(v, s, plan, artifacts,
                                           force_profiles, expected_ticks,
                                           base_config))
            if progress:
                progress(v, s)
    for v in rows:
        rows[v].sort(key=lambda r: r["seed"])
    return {v: summarize(v, rows[v]) for v in spec.variants}
