from .core import (AgentConfig, HighRecord, LowEpisode, ThetaSchedule, argmax_probs, argmax_random,
                   relabel_high_rewards, rlsvi_fit, select_action, stationary_rlsvi_fit, ts_fit)
from .runner import ALGORITHMS, BlockPolicy, BlockRecord, RunHistory, run_algorithm

__all__ = [
    "AgentConfig", "HighRecord", "LowEpisode", "ThetaSchedule", "argmax_probs", "argmax_random",
    "relabel_high_rewards", "rlsvi_fit", "select_action", "stationary_rlsvi_fit", "ts_fit",
    "ALGORITHMS", "BlockPolicy", "BlockRecord", "RunHistory", "run_algorithm",
]
