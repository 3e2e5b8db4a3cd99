from .maze import MazeEnv, MazeEnvConfig, MazeLayout, block_mdp
from .testbed import DyadModel, EffectConfig, TestbedEnv, run_trial, synth_dyad_models
from .validate import ValidationReport, validate_dyadic_transitions

__all__ = [
    "MazeEnv", "MazeEnvConfig", "MazeLayout", "block_mdp",
    "DyadModel", "EffectConfig", "TestbedEnv", "run_trial", "synth_dyad_models",
    "ValidationReport", "validate_dyadic_transitions",
]
