import numpy as np
import pytest

from dyadrl.envs.maze import MazeEnv, MazeEnvConfig
from dyadrl.envs.testbed import TestbedEnv
from dyadrl.envs.validate import constraint_violations, validate_dyadic_transitions
from dyadrl.errors import InvalidInputError

ROLLOUTS = 1500  # the full 10^4-rollout runs live in the acceptance suite


def _report(variant, n=ROLLOUTS, env_cls=MazeEnv):
    env = env_cls(MazeEnvConfig.for_variant(variant), np.random.default_rng(0), 15, 7)
    return validate_dyadic_transitions(env, n, np.random.default_rng(1))


def test_toy1_passes_every_check():
    report = _report("toy1")
    assert report.structural_ok
    assert set(report.checks) == {"constraint_1", "constraint_2", "constraint_3",
                                  "exit_state_independence", "block_homogeneity"}
    assert all(report.checks.values())
    # the last step of an episode has no successor
    assert report.n_transitions == ROLLOUTS * (15 * 8 - 1)


def test_toy5_is_flagged_as_non_homogeneous():
    report = _report("toy5")
    assert report.structural_ok
    assert report.checks["exit_state_independence"]
    assert not report.checks["block_homogeneity"]


def test_zero_rollouts_claim_nothing():
    report = _report("toy1", n=0)
    assert report.checks == {} and report.structural_ok is None
    assert report.n_transitions == 0


class _LeakyWeather(MazeEnv):
    """Reports a different weather halfway through each block."""

    def five_tuple(self):
        w, h, weather, maze, low = super().five_tuple()
        return (w, h, 1 - weather if h >= 4 else weather, maze, low)


class _SwitchingMaze(MazeEnv):
    def five_tuple(self):
        w, h, weather, maze, low = super().five_tuple()
        return (w, h, weather, None if maze is None else (1 - maze if h == 5 else maze), low)


def test_broken_structure_is_reported():
    leaky = _report("toy1", n=20, env_cls=_LeakyWeather)
    assert leaky.violations[1] > 0 and not leaky.structural_ok
    switching = _report("toy1", n=20, env_cls=_SwitchingMaze)
    assert switching.violations[2] > 0 and switching.violations[1] == 0


def test_constraint_rules():
    H = 3
    assert constraint_violations((1, 1, 0, 1, 4), (1, 2, 0, 1, 5), H) == []
    assert constraint_violations((1, 1, 0, 1, 4), (1, 2, 1, 1, 5), H) == [1]
    assert constraint_violations((1, 1, 0, 1, 4), (1, 2, 0, 0, 5), H) == [2]
    assert constraint_violations((1, 3, 0, 1, 4), (2, 0, 1, None, None), H) == []
    assert constraint_violations((1, 3, 0, 1, 4), (2, 0, 1, 1, None), H) == [3]


def test_horizon_mismatch_rejected():
    env = MazeEnv(MazeEnvConfig.for_variant("toy1"), np.random.default_rng(0), 15, 7)
    with pytest.raises(InvalidInputError):
        validate_dyadic_transitions(env, 10, np.random.default_rng(0), n_blocks=15, n_periods=6)
    env.n_periods = "7"
    with pytest.raises(InvalidInputError):
        validate_dyadic_transitions(env, 10, np.random.default_rng(0))


def test_non_tabular_env_rejected():
    with pytest.raises(InvalidInputError):
        validate_dyadic_transitions(object.__new__(TestbedEnv), 10, np.random.default_rng(0))


def test_report_lines_mention_each_check():
    text = "\n".join(_report("toy1", n=200).lines())
    for name in ("constraint 1", "constraint 2", "constraint 3", "block homogeneity", "exit state"):
        assert name in text
