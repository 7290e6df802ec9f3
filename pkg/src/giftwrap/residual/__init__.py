from .reward import STATE_DIM, RewardWeights, build_state, compute_reward
from .sac import ACTION_DIM, ReplayBuffer, SACAgent, SACConfig
from .toy_env import SpringWallConfig, SpringWallEnv
from .profile import desired_force_profile, force_reference_at, time_binned_profile
from .train import ForceCurve, train_on_env, train_residual

__all__ = [
    "RewardWeights", "build_state", "compute_reward", "STATE_DIM",
    "SACAgent", "SACConfig", "ReplayBuffer", "ACTION_DIM",
    "SpringWallEnv", "SpringWallConfig",
    "desired_force_profile", "time_binned_profile", "force_reference_at",
    "train_on_env", "train_residual", "ForceCurve",
]
