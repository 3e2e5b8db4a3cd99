import csv
import io

import numpy as np
import pytest

from dyadrl.errors import ConfigError, InvalidInputError
from dyadrl.evaluation.harness import (BLOCK_COLUMNS, SWEEP_COLUMNS, ExperimentConfig, SweepConfig, aggregate,
                                      config_from_dict, fmt, rep_seed, run_experiment, run_rep, summary_path,
                                      sweep_csv, sweep_testbed)


def small(**kw):
    base = dict(env="toy1", algo="dyadic", episodes=3, blocks=15, periods=7, reps=2, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_fixed_seed_gives_identical_files(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_experiment(small(out=str(a)))
    run_experiment(small(out=str(b)))
    assert a.read_bytes() == b.read_bytes()
    assert summary_path(a).read_bytes() == summary_path(b).read_bytes()


def test_block_file_has_one_row_per_block(tmp_path):
    out = tmp_path / "blocks.csv"
    run_experiment(small(out=str(out)))
    rows = _rows(out.read_text())
    assert tuple(rows[0]) == BLOCK_COLUMNS
    assert len(rows) - 1 == 2 * 3 * 15
    assert all(r[6] != "" for r in rows[1:])  # toy1 has an oracle


def test_regret_column_blank_without_an_oracle():
    res = run_experiment(small(env="toy3", reps=1, episodes=1))
    assert all(r[6] == "" for r in _rows(res.block_csv())[1:])
    assert res.cumulative_regret("dyadic") is None


def test_unknown_env_rejected_before_writing(tmp_path):
    out = tmp_path / "never.csv"
    with pytest.raises(ConfigError):
        run_experiment(small(env="toy9", out=str(out)))
    assert not out.exists()


def test_unwritable_output_rejected_before_running(tmp_path):
    with pytest.raises(OSError):
        run_experiment(small(out=str(tmp_path / "missing" / "x.csv")))


@pytest.mark.parametrize("kw", [{"algo": "sarsa"}, {"hyper": "tuned"}, {"reps": 0}, {"b1_k": 9},
                                {"env": "testbed", "hyper": "theory"}, {"mood_effect": "mild"}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_repetitions_are_reproducible_in_isolation():
    cfg = small(reps=3)
    full = run_experiment(cfg)
    alone = run_rep(cfg, "dyadic", 2)
    assert np.array_equal(full.reps["dyadic"][2].block_rewards, alone.block_rewards)


def test_algorithms_share_environment_seeds():
    a = rep_seed(1, 4, 0).generate_state(4)
    b = rep_seed(1, 4, 0).generate_state(4)
    c = rep_seed(1, 4, 1).generate_state(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_regret_is_nonnegative_and_nondecreasing():
    res = run_experiment(small(env="toy2", algo=("dyadic", "full", "stationary"), reps=2, episodes=4))
    for algo in ("dyadic", "full", "stationary"):
        curves = res.cumulative_regret(algo)
        assert np.all(np.diff(curves, axis=1) >= -1e-12) and np.all(curves >= -1e-12)


def test_testbed_experiment_runs():
    res = run_experiment(small(env="testbed", reps=1, episodes=2, blocks=2, n_models=3))
    assert res.block_rewards("dyadic").shape == (1, 2, 2)


# -- aggregation ----------------------------------------------------------------------------

def test_single_repetition_has_zero_error():
    mean, se = aggregate([[1.0, 2.0, 3.0]])
    assert np.array_equal(mean, [1.0, 2.0, 3.0]) and np.array_equal(se, [0.0, 0.0, 0.0])


def test_opposite_curves_average_to_zero():
    c = np.array([0.3, -1.2, 4.0])
    assert np.array_equal(aggregate([c, -c])[0], np.zeros(3))


def test_aggregate_matches_brute_force():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((10, 6))
    mean, se = aggregate(data)
    for j in range(6):
        col = [float(x) for x in data[:, j]]
        m = sum(col) / 10
        s = (sum((x - m) ** 2 for x in col) / 9) ** 0.5 / 10 ** 0.5
        assert abs(mean[j] - m) < 1e-12 and abs(se[j] - s) < 1e-12


def test_aggregate_rejects_empty_input():
    with pytest.raises(InvalidInputError):
        aggregate([])


def test_summary_matches_aggregated_blocks(tmp_path):
    out = tmp_path / "r.csv"
    res = run_experiment(small(out=str(out)))
    rows = _rows(summary_path(out).read_text())
    mean, se = aggregate(res.block_rewards("dyadic").reshape(2, -1))
    assert len(rows) - 1 == 3 * 15
    assert float(rows[1][4]) == mean[0] and float(rows[-1][5]) == se[-1]


def test_floats_use_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(None) == ""
    assert float(fmt(np.pi)) == np.pi


# -- sweeps --------------------------------------------------------------------------------

def _sweep(**kw):
    base = dict(b1=(1, 8), b2=(8,), trials=2, seed=3, algos=("bandit",), n_dyads=2, weeks=2, n_models=4)
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_cells_and_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    cells = sweep_testbed(_sweep(out=str(out)))
    assert [(c.b1_k, c.b2_k, c.algo) for c in cells] == [(1, 8, "bandit"), (8, 8, "bandit")]
    rows = _rows(out.read_text())
    assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == 3
    assert rows[1][6] == "2" and float(rows[1][4]) == cells[0].mean
    assert out.read_text() == sweep_csv(cells)


def test_sweep_is_reproducible():
    a, b = sweep_testbed(_sweep()), sweep_testbed(_sweep())
    assert sweep_csv(a) == sweep_csv(b)


@pytest.mark.parametrize("kw", [{"b1": (0,)}, {"algos": ("dyadic",)}, {"days": 8}, {"trials": 0}])
def test_sweep_validation(kw):
    with pytest.raises(ConfigError):
        _sweep(**kw)


def test_config_from_dict():
    cfg = config_from_dict("simulate", {"env": "toy2", "reps": 3})
    assert cfg.env == "toy2" and cfg.reps == 3
    assert config_from_dict("sweep", {"b1": [1, 2]}).b1 == [1, 2]
    with pytest.raises(ConfigError):
        config_from_dict("simulate", {"envv": "toy2"})
