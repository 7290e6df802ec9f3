"""Paper-integrity scoring and success judging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..sim.core import DefectScores, SimState, Simulator


@dataclass
class PISWeights:
    w1: float = 0.5
    w2: float = 0.3
    w3: float = 0.2

    def __post_init__(self) -> None:
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("integrity weights must be non-negative")


def compute_pis(scores: DefectScores, weights: PISWeights | None = None) -> float:
    """1 - (w1 T + w2 W + w3 E), unclamped: scores in [0,1] with the default
    weights keep the result in [0,1]."""
    w = weights or PISWeights()
    return 1.0 - (w.w1 * scores.T + w.w2 * scores.W + w.w3 * scores.E)


@dataclass
class SuccessCriteria:
    max_crease_rms: float = 0.05     # m per crease window
    max_wrinkle: float = 0.35
    max_edge: float = 0.60
    tears_allowed: bool = False


def judge_success(sim: Simulator, state: SimState,
                  criteria: SuccessCriteria | None = None,
                  stages: tuple[int, ...] | None = None
                  ) -> tuple[bool, list[str]]:
    """Success iff no tears, every intended crease of the completed stages
    within tolerance, and wrinkle/edge scores below thresholds."""
    crit = criteria or SuccessCriteria()
    violations: list[str] = []
    if not crit.tears_allowed and state.chain.torn.any():
        violations.append(f"torn segments: {np.where(state.chain.torn)[0].tolist()}")
    scores = sim.compute_defects(state)
    if scores.W > crit.max_wrinkle:
        violations.append(f"wrinkle score {scores.W:.3f} > {crit.max_wrinkle}")
    if scores.E > crit.max_edge:
        violations.append(f"edge score {scores.E:.3f} > {crit.max_edge}")
    for stage in stages or sorted(state.completed_stages):
        for hinge, err in sim.crease_errors(state, stage).items():
            if err > crit.max_crease_rms:
                violations.append(
                    f"stage {stage} crease at joint {hinge}: "
                    f"{err * 1000:.1f} mm > {crit.max_crease_rms * 1000:.0f} mm")
    return (not violations), violations
