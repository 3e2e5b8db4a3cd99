"""Experiment orchestration: seeded repetitions, regret bookkeeping, CSV output."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..agents.core import AgentConfig
from ..agents.runner import ALGORITHMS, run_algorithm
from ..envs.maze import VARIANTS, MazeEnv, MazeEnvConfig, block_mdp
from ..envs.testbed import MOOD_EFFECTS, EffectConfig, TestbedEnv, ingest_dyad_models, run_trial, synth_dyad_models
from ..errors import ConfigError, InvalidInputError
from .oracle import optimal_block_values, policy_block_value

ENVS = VARIANTS + ("testbed",)
HYPER_MODES = ("fixed1", "theory")
REGRET_ENVS = ("toy1", "toy2")
BLOCK_COLUMNS = ("rep", "episode", "block", "algo", "env", "block_reward", "regret_or_blank")
SUMMARY_COLUMNS = ("algo", "env", "episode", "block", "mean_block_reward", "se_block_reward",
                   "mean_cumulative_regret", "se_cumulative_regret", "reps")
SWEEP_COLUMNS = ("b1_k", "b2_k", "mood_effect", "algo", "mean_total_reward_diff_vs_dyadic",
                 "std_error", "trials")
ENV_STREAM, AGENT_STREAM = 0, 1
MODEL_STREAM = 2 ** 32  # spawn-key slot for test-bed model generation, outside any rep index


def fmt(x) -> str:
    """Floats with 17 significant digits; None as an empty field."""
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def rep_seed(seed: int, rep: int, stream: int) -> np.random.SeedSequence:
    """Counter-based child seed: repetition ``rep`` is reproducible on its own."""
    return np.random.SeedSequence(seed, spawn_key=(rep, stream))


@dataclass
class ExperimentConfig:
    env: str = "toy1"
    algo: str | Sequence[str] = "dyadic"
    episodes: int = 100
    blocks: int = 15
    periods: int = 7
    reps: int = 1
    seed: int = 0
    hyper: str = "fixed1"
    out: str | None = None
    jobs: int = 1
    warm_start_episodes: int = 1
    b1_k: int = 8
    b2_k: int = 8
    mood_effect: str = "none"
    models: str | None = None  # dyad-model JSON file for the test bed
    n_models: int = 49

    def __post_init__(self):
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; expected one of {ENVS}")
        for a in self.algos:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algo {a!r}; expected one of {ALGORITHMS}")
        if self.hyper not in HYPER_MODES:
            raise ConfigError(f"unknown hyper mode {self.hyper!r}; expected one of {HYPER_MODES}")
        for name in ("episodes", "blocks", "periods", "reps", "jobs", "n_models"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.warm_start_episodes < 0:
            raise ConfigError("warm_start_episodes must be nonnegative")
        if self.mood_effect not in MOOD_EFFECTS:
            raise ConfigError(f"unknown mood effect {self.mood_effect!r}")
        if self.env == "testbed" and self.hyper == "theory":
            raise ConfigError("theory-mode hyperparameters need a tabular environment")
        if self.env == "testbed" and self.periods > 7:
            raise ConfigError("test-bed blocks are weeks of at most 7 days")
        try:
            EffectConfig(self.b1_k, self.b2_k, self.mood_effect)
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def algos(self) -> tuple:
        return (self.algo,) if isinstance(self.algo, str) else tuple(self.algo)

    def agent_config(self) -> AgentConfig:
        return AgentConfig(theory=self.hyper == "theory", warm_start_episodes=self.warm_start_episodes)


class MazeRegretOracle:
    """Per-block (V*_0, V^pi_0) at the observed weather, by exact DP.

    Blocks without a fixed policy (bandit refits inside the block) use the
    realized block reward in place of V^pi_0; its conditional expectation
    given the block's start is the value of the executed policy.
    """

    def __init__(self, config: MazeEnvConfig, n_periods: int = 7):
        if config.variant not in REGRET_ENVS:
            raise ConfigError(f"regret needs a block-stationary env {REGRET_ENVS}, got {config.variant!r}")
        self.mdp = block_mdp(config, n_periods)
        self.v_star = optimal_block_values(self.mdp)
        n_states = self.mdp.rewards[1].shape[0]
        uniform = [np.full((2, 2), 0.5)] + [np.full((n_states, 2), 0.5)] * n_periods
        self.v_uniform = policy_block_value(self.mdp, uniform)

    def policy_value(self, weather: int, high_probs, low_thetas) -> float:
        mdp = self.mdp
        v = None
        for h in range(len(low_thetas), 0, -1):
            q = mdp.rewards[h] if v is None else mdp.rewards[h] + mdp._expected_next(h, v)
            theta = np.asarray(low_thetas[h - 1]).reshape(-1, 2)
            top = theta == theta.max(axis=1, keepdims=True)
            v = (top * q).sum(axis=1) / top.sum(axis=1)
        q0 = mdp.rewards[0][weather] + mdp._expected_next(0, v)[weather]
        return float(np.dot(high_probs, q0))

    def __call__(self, weather, policy, block_reward):
        v_star = float(self.v_star[weather])
        if policy is None:
            return v_star, float(block_reward)
        if policy.uniform:
            return v_star, float(self.v_uniform[weather])
        return v_star, self.policy_value(weather, policy.high_probs, policy.low_thetas)


@dataclass
class RepResult:
    algo: str
    rep: int
    block_rewards: np.ndarray  # (K, W)
    regrets: np.ndarray | None  # (K, W) per-block gaps


def _testbed_models(config: ExperimentConfig) -> list:
    if config.models:
        return ingest_dyad_models(config.models)
    rng = np.random.default_rng(rep_seed(config.seed, MODEL_STREAM, 0))
    return synth_dyad_models(config.n_models, rng)


def run_rep(config: ExperimentConfig, algo: str, rep: int, models=None) -> RepResult:
    env_rng = np.random.default_rng(rep_seed(config.seed, rep, ENV_STREAM))
    agent_rng = np.random.default_rng(rep_seed(config.seed, rep, AGENT_STREAM))
    K, W, H = config.episodes, config.blocks, config.periods
    evaluator = None
    if config.env == "testbed":
        models = models if models is not None else _testbed_models(config)
        idx = env_rng.integers(len(models), size=K)
        effect = EffectConfig(config.b1_k, config.b2_k, config.mood_effect)
        env = TestbedEnv([models[i] for i in idx], effect, env_rng, W, H)
    else:
        maze_config = MazeEnvConfig.for_variant(config.env)
        env = MazeEnv(maze_config, env_rng, W, H)
        if config.env in REGRET_ENVS:
            evaluator = MazeRegretOracle(maze_config, H)
    hist = run_algorithm(algo, env, K, W, H, config.agent_config(), agent_rng, evaluator)
    return RepResult(algo, rep, hist.block_rewards(), hist.regrets())


def _run_rep_star(args):
    return run_rep(*args)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def aggregate(per_rep) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error across repetitions (axis 0); SE is 0 for one repetition."""
    arr = np.asarray(per_rep, dtype=float)
    if arr.size == 0 or arr.shape[0] == 0:
        raise InvalidInputError("aggregate needs at least one repetition")
    mean = arr.mean(axis=0)
    if arr.shape[0] == 1:
        return mean, np.zeros_like(mean)
    return mean, arr.std(axis=0, ddof=1) / np.sqrt(arr.shape[0])


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reps: dict = field(default_factory=dict)  # algo -> list of RepResult

    def block_rewards(self, algo: str) -> np.ndarray:
        return np.stack([r.block_rewards for r in self.reps[algo]])

    def cumulative_regret(self, algo: str) -> np.ndarray | None:
        """(reps, K*W) running regret curves, or None when no oracle applies."""
        regrets = [r.regrets for r in self.reps[algo]]
        if regrets[0] is None:
            return None
        return np.cumsum(np.stack([g.reshape(-1) for g in regrets]), axis=1)

    def block_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BLOCK_COLUMNS)
        for algo in self.config.algos:
            for r in self.reps[algo]:
                K, W = r.block_rewards.shape
                for k in range(K):
                    for b in range(W):
                        regret = None if r.regrets is None else r.regrets[k, b]
                        w.writerow([r.rep, k + 1, b + 1, algo, self.config.env,
                                    fmt(r.block_rewards[k, b]), fmt(regret)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        K, W = self.config.episodes, self.config.blocks
        for algo in self.config.algos:
            rew_mean, rew_se = aggregate(self.block_rewards(algo).reshape(-1, K * W))
            curves = self.cumulative_regret(algo)
            reg_mean, reg_se = aggregate(curves) if curves is not None else (None, None)
            for t in range(K * W):
                w.writerow([algo, self.config.env, t // W + 1, t % W + 1, fmt(rew_mean[t]), fmt(rew_se[t]),
                            fmt(None if reg_mean is None else reg_mean[t]),
                            fmt(None if reg_se is None else reg_se[t]), len(self.reps[algo])])
        return buf.getvalue()


def summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_summary" + (out.suffix or ".csv"))


def _check_writable(out) -> None:
    parent = Path(out).resolve().parent
    if not parent.is_dir():
        raise OSError(f"output directory {parent} does not exist")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every repetition of every requested algorithm; write CSVs when ``config.out`` is set.

    The per-block file goes to ``out``; mean curves with standard errors go
    to ``<stem>_summary.csv`` next to it.  All algorithms share each
    repetition's environment seed.
    """
    if config.out:
        _check_writable(config.out)
    models = _testbed_models(config) if config.env == "testbed" else None
    result = ExperimentResult(config)
    for algo in config.algos:
        jobs = [(config, algo, rep, models) for rep in range(config.reps)]
        result.reps[algo] = _map(_run_rep_star, jobs, config.jobs)
    if config.out:
        Path(config.out).write_text(result.block_csv())
        summary_path(config.out).write_text(result.summary_csv())
    return result


# -- test-bed sweeps -------------------------------------------------------------

@dataclass
class SweepConfig:
    b1: Sequence[int] = (1,)
    b2: Sequence[int] = (1,)
    mood_effect: str = "none"
    trials: int = 10
    seed: int = 0
    out: str | None = None
    algos: Sequence[str] = ("full", "bandit", "stationary")
    n_dyads: int = 100
    weeks: int = 14
    days: int = 7
    models: str | None = None
    n_models: int = 49
    jobs: int = 1

    def __post_init__(self):
        for k in list(self.b1) + list(self.b2):
            if not (isinstance(k, (int, np.integer)) and 1 <= k <= 8):
                raise ConfigError(f"burden indices must be integers in 1..8, got {k!r}")
        if self.mood_effect not in MOOD_EFFECTS:
            raise ConfigError(f"unknown mood effect {self.mood_effect!r}")
        for a in self.algos:
            if a not in ALGORITHMS or a == "dyadic":
                raise ConfigError(f"sweep baselines must be among {ALGORITHMS[1:]}, got {a!r}")
        for name in ("trials", "n_dyads", "weeks", "days", "n_models", "jobs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.days > 7:
            raise ConfigError("test-bed blocks are weeks of at most 7 days")


@dataclass
class SweepCell:
    b1_k: int
    b2_k: int
    mood_effect: str
    algo: str
    diffs: np.ndarray  # per-trial baseline total minus dyadic total

    @property
    def mean(self) -> float:
        return float(aggregate(self.diffs)[0])

    @property
    def se(self) -> float:
        return float(aggregate(self.diffs)[1])


def _trial_totals(args) -> dict:
    models, algos, cfg, effect, trial = args
    out = {}
    for algo in ("dyadic",) + tuple(algos):
        # the same generator seed for every algorithm: same dyads, same noise
        rng = np.random.default_rng(rep_seed(cfg.seed, trial, ENV_STREAM))
        out[algo] = run_trial(models, algo, cfg.n_dyads, cfg.weeks, cfg.days, effect, rng).grand_total
    return out


def sweep_testbed(config: SweepConfig, models=None) -> list:
    """Baseline-minus-dyadic total reward per (b1_k, b2_k) cell, with paired standard errors."""
    if config.out:
        _check_writable(config.out)
    if models is None:
        if config.models:
            models = ingest_dyad_models(config.models)
        else:
            models = synth_dyad_models(config.n_models,
                                       np.random.default_rng(rep_seed(config.seed, MODEL_STREAM, 0)))
    cells = []
    for b1 in config.b1:
        for b2 in config.b2:
            effect = EffectConfig(int(b1), int(b2), config.mood_effect)
            jobs = [(models, tuple(config.algos), config, effect, t) for t in range(config.trials)]
            totals = _map(_trial_totals, jobs, config.jobs)
            for algo in config.algos:
                diffs = np.array([t[algo] - t["dyadic"] for t in totals])
                cells.append(SweepCell(int(b1), int(b2), config.mood_effect, algo, diffs))
    if config.out:
        Path(config.out).write_text(sweep_csv(cells))
    return cells


def sweep_csv(cells: Sequence[SweepCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for c in cells:
        w.writerow([c.b1_k, c.b2_k, c.mood_effect, c.algo, fmt(c.mean), fmt(c.se), len(c.diffs)])
    return buf.getvalue()


def config_from_dict(kind: str, data: dict):
    """Build an experiment or sweep config from parsed JSON, rejecting unknown keys."""
    cls = ExperimentConfig if kind == "simulate" else SweepConfig
    known = set(cls.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


__all__ = [
    "ENVS", "ExperimentConfig", "ExperimentResult", "MazeRegretOracle", "RepResult", "SweepCell",
    "SweepConfig", "aggregate", "config_from_dict", "fmt", "rep_seed", "run_experiment", "run_rep",
    "summary_path", "sweep_csv", "sweep_testbed",
]
