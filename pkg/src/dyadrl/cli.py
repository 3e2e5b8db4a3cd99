"""Command-line entry point: ``dyadrl simulate | sweep-testbed | validate``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .envs.maze import VARIANTS, MazeEnv, MazeEnvConfig
from .envs.testbed import MOOD_EFFECTS
from .envs.validate import validate_dyadic_transitions
from .errors import ConfigError, InvalidInputError, ParseError
from .evaluation.harness import (ENVS, HYPER_MODES, aggregate, config_from_dict, run_experiment,
                                 summary_path, sweep_csv, sweep_testbed)


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _str_list(text: str) -> list:
    return [x.strip() for x in text.split(",") if x.strip()]


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _merge(args, mapping: dict) -> dict:
    """JSON config values, overridden by any flag given on the command line."""
    data = _load_config(args.config)
    for flag, key in mapping.items():
        value = getattr(args, flag)
        if value is not None:
            data[key] = value
    return data


def _simulate(args) -> int:
    data = _merge(args, {
        "env": "env", "algo": "algo", "episodes": "episodes", "blocks": "blocks", "periods": "periods",
        "reps": "reps", "seed": "seed", "hyper": "hyper", "out": "out", "jobs": "jobs",
        "warm_start": "warm_start_episodes", "b1_k": "b1_k", "b2_k": "b2_k",
        "mood_effect": "mood_effect", "models": "models",
    })
    if isinstance(data.get("algo"), list) and len(data["algo"]) == 1:
        data["algo"] = data["algo"][0]
    config = config_from_dict("simulate", data)
    result = run_experiment(config)
    K, W = config.episodes, config.blocks
    for algo in config.algos:
        rewards = result.block_rewards(algo).reshape(len(result.reps[algo]), -1).sum(axis=1)
        mean, se = aggregate(rewards)
        line = f"{algo}: total reward {float(mean):.4f} (se {float(se):.4f})"
        curves = result.cumulative_regret(algo)
        if curves is not None:
            rmean, rse = aggregate(curves[:, K * W - 1])
            line += f", cumulative regret {float(rmean):.4f} (se {float(rse):.4f})"
        print(line)
    if config.out:
        print(f"wrote {config.out} and {summary_path(config.out)}")
    return 0


def _sweep(args) -> int:
    data = _merge(args, {
        "b1": "b1", "b2": "b2", "mood_effect": "mood_effect", "trials": "trials", "seed": "seed",
        "out": "out", "algos": "algos", "n_dyads": "n_dyads", "weeks": "weeks", "days": "days",
        "models": "models", "jobs": "jobs",
    })
    config = config_from_dict("sweep", data)
    cells = sweep_testbed(config)
    if config.out:
        print(f"wrote {config.out}")
    else:
        sys.stdout.write(sweep_csv(cells))
    return 0


def _validate(args) -> int:
    if args.env not in VARIANTS:
        raise ConfigError(f"validate needs a tabular env {VARIANTS}, got {args.env!r}")
    env = MazeEnv(MazeEnvConfig.for_variant(args.env), np.random.default_rng([args.seed, 0]),
                  args.blocks, args.periods)
    report = validate_dyadic_transitions(env, args.rollouts, np.random.default_rng([args.seed, 1]))
    print("\n".join(report.lines()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyadrl", description="Dyadic RL simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run repetitions of one or more algorithms")
    sim.add_argument("--config", help="JSON file with experiment settings")
    sim.add_argument("--env", help=f"one of {', '.join(ENVS)}")
    sim.add_argument("--algo", type=_str_list, help="dyadic, full, stationary or bandit (comma-separated)")
    sim.add_argument("--episodes", type=int)
    sim.add_argument("--blocks", type=int)
    sim.add_argument("--periods", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--hyper", help=f"one of {', '.join(HYPER_MODES)}")
    sim.add_argument("--out", help="per-block CSV path; a _summary.csv is written beside it")
    sim.add_argument("--jobs", type=int, help="worker processes")
    sim.add_argument("--warm-start", type=int, help="uniform-action episodes before learning")
    sim.add_argument("--b1-k", type=int, help="test bed: burden threshold index b1")
    sim.add_argument("--b2-k", type=int, help="test bed: disengagement threshold index b2")
    sim.add_argument("--mood-effect", help=f"test bed: one of {', '.join(MOOD_EFFECTS)}")
    sim.add_argument("--models", help="test bed: dyad-model JSON file")
    sim.set_defaults(handler=_simulate)

    sw = sub.add_parser("sweep-testbed", help="baseline minus dyadic total reward over a threshold grid")
    sw.add_argument("--config", help="JSON file with sweep settings")
    sw.add_argument("--b1", type=_int_list, help="comma-separated b1 indices in 1..8")
    sw.add_argument("--b2", type=_int_list, help="comma-separated b2 indices in 1..8")
    sw.add_argument("--mood-effect", help=f"one of {', '.join(MOOD_EFFECTS)}")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--out", help="CSV path; printed to stdout when omitted")
    sw.add_argument("--algos", type=_str_list, help="baselines, comma-separated")
    sw.add_argument("--n-dyads", type=int)
    sw.add_argument("--weeks", type=int)
    sw.add_argument("--days", type=int)
    sw.add_argument("--models", help="dyad-model JSON file")
    sw.add_argument("--jobs", type=int)
    sw.set_defaults(handler=_sweep)

    val = sub.add_parser("validate", help="Monte Carlo check of the dyadic transition structure")
    val.add_argument("--env", required=True, help=f"one of {', '.join(VARIANTS)}")
    val.add_argument("--rollouts", type=int, default=10_000)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--blocks", type=int, default=15)
    val.add_argument("--periods", type=int, default=7)
    val.set_defaults(handler=_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, InvalidInputError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
