from .rotation import matrix_from_rot6d, rot6d_from_matrix
from .types import ACTION_DIM, Action, ActionChunk, Observation
from .network import PolicyConfig, StartPolicy, il_loss, kl_divergence
from .runtime import (
    NormStats,
    PolicyRuntime,
    TemporalEnsemble,
    TransitionDetector,
    detect_transition,
    embed_subtask,
    load_checkpoint,
    save_checkpoint,
)
from .train import train

__all__ = [
    "rot6d_from_matrix", "matrix_from_rot6d",
    "Action", "ActionChunk", "Observation", "ACTION_DIM",
    "PolicyConfig", "StartPolicy", "il_loss", "kl_divergence",
    "PolicyRuntime", "NormStats", "TemporalEnsemble", "TransitionDetector",
    "detect_transition", "embed_subtask", "load_checkpoint", "save_checkpoint",
    "train",
]
