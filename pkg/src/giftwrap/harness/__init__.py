from .metrics import PISWeights, SuccessCriteria, compute_pis, judge_success
from .episode import EpisodeOptions, EpisodeResult, PlanPolicyMismatch, run_episode
from .ablation import (
    AblationSpec,
    VariantArtifacts,
    VariantSummary,
    paired_permutation_p,
    run_ablation,
    run_one_episode,
    summarize,
)
from .report import emit_report

__all__ = [
    "PISWeights", "SuccessCriteria", "compute_pis", "judge_success",
    "EpisodeOptions", "EpisodeResult", "PlanPolicyMismatch", "run_episode",
    "AblationSpec", "VariantArtifacts", "VariantSummary", "run_ablation",
    "run_one_episode", "summarize", "paired_permutation_p",
    "emit_report",
]
