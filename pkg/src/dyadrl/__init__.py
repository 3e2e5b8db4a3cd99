"""Hierarchical posterior-sampling RL for dyadic environments, with toy mazes and a test bed."""
from .agents import AgentConfig, RunHistory, run_algorithm
from .bayes import Posterior, RegressionData, posterior, sample_weights
from .errors import ConfigError, InvalidInputError, NumericError, ParseError

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "RunHistory", "run_algorithm",
    "Posterior", "RegressionData", "posterior", "sample_weights",
    "ConfigError", "InvalidInputError", "NumericError", "ParseError",
]
