# The experiment harness imports the agents, which import the oracle; keep
# this package import light and reach the harness as dyadrl.evaluation.harness.
from .oracle import (BlockMDP, cumulative_regret, optimal_block_values, policy_block_value,
                     theory_hyperparams)

__all__ = ["BlockMDP", "cumulative_regret", "optimal_block_values", "policy_block_value",
           "theory_hyperparams"]
