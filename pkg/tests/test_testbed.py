import json
from dataclasses import replace

import numpy as np
import pytest

from dyadrl.envs.testbed import (BOUNDS, GAMMA, MOOD_EFFECTS, POPULATION_STATS, SS, VARIABLES, DyadModel,
                                 EffectConfig, Residual, TestbedEnv, b_threshold, burden, daily_transition,
                                 dump_dyad_models, effective_low_effect, fixed_policy, ingest_dyad_models,
                                 initial_state, run_trial, synth_dyad_models, weekly_transition)
from dyadrl.errors import InvalidInputError, ParseError
from helpers import ZeroRng

# (six daily intervention flags ending on day 6, burden)
BURDEN_TABLE = [
    ((0, 0, 1, 1, 1, 1), 0.4602),
    ((0, 1, 1, 0, 1, 1), 0.4324),
    ((1, 1, 0, 0, 1, 1), 0.4085),
    ((0, 0, 0, 1, 1, 1), 0.3702),
    ((1, 1, 1, 0, 1, 0), 0.3556),
    ((0, 0, 1, 1, 1, 0), 0.3174),
    ((0, 0, 0, 0, 1, 1), 0.2653),
    ((1, 1, 0, 1, 0, 0), 0.2482),
    ((0, 0, 1, 0, 0, 1), 0.2328),
    ((0, 0, 0, 0, 0, 1), 0.1429),
]


def zero_model(**overrides):
    res = {v: Residual(0.0, 1.0) for v in VARIABLES}
    fields = dict(beta_heart=np.zeros(6), beta_sleep=np.zeros(6), beta_sqrtstep=np.zeros(6),
                  theta_mood_target=np.zeros(3), theta_mood_partner=np.zeros(3), residuals=res)
    fields.update(overrides)
    return DyadModel(**fields)


# -- burden ----------------------------------------------------------------------------

@pytest.mark.parametrize("k, value", [(1, 0.1429), (2, 0.2653), (3, 0.3702), (4, 0.4602)])
def test_threshold_values(k, value):
    assert abs(b_threshold(k) - value) < 1e-4


def test_threshold_closed_form():
    for k in range(1, 9):
        assert b_threshold(k) == pytest.approx(1 - GAMMA ** k, abs=1e-15)


def test_threshold_rejects_nonpositive_k():
    with pytest.raises(InvalidInputError):
        b_threshold(0)


@pytest.mark.parametrize("actions, value", BURDEN_TABLE)
def test_burden_table(actions, value):
    assert abs(burden(actions) - value) < 1e-4


def test_burden_of_empty_week():
    assert burden([]) == 0.0


def test_burden_rejects_long_weeks():
    with pytest.raises(InvalidInputError):
        burden([0] * 8)


# -- low-level effect ------------------------------------------------------------------------

def test_effect_without_burden():
    m = zero_model(beta_sqrtstep=np.array([0, 0, 0, 0.5, 0, 0.0]))
    assert effective_low_effect(m, [0.0, 0.0], b_threshold(2), b_threshold(4)) == m.tau0 == 0.1


def test_effect_between_thresholds():
    m = zero_model(beta_sqrtstep=np.array([0, 0, 0, 0.5, 0, 0.0]))
    b1, b2 = b_threshold(2), b_threshold(4)
    assert effective_low_effect(m, [b_threshold(1), b_threshold(3)], b1, b2) == pytest.approx(0.1 - 0.05)


def test_effect_after_disengagement():
    m = zero_model(beta_sqrtstep=np.array([0, 0, 0, 0.5, 0, 0.0]))
    b1, b2 = b_threshold(2), b_threshold(3)
    assert effective_low_effect(m, [b_threshold(4), 0.0], b1, b2) == 0.0


def test_tau_ratios():
    m = zero_model(beta_sqrtstep=np.array([0, 0, 0, 0.5, 0, 0.0]), theta_mood_target=np.array([0, 0.6, 0.0]))
    assert (m.tau0, m.tau1, m.tau_high) == (0.5 / 5, 0.5 / 10, 0.5 / 25)
    assert m.tau_mood("none") == 0.0
    assert m.tau_mood("strong") == pytest.approx(0.6 / 25)
    assert m.tau_mood("extreme") == pytest.approx(2 * m.tau_mood("strong"))
    assert m.tau_mood("weak") == pytest.approx(0.6 / 50)


# -- transitions --------------------------------------------------------------------------

def test_zero_model_returns_intercepts():
    m = zero_model(beta_heart=np.array([0.5, 0, 0, 0, 0, 0]), beta_sleep=np.array([-1.0, 0, 0, 0, 0, 0]),
                   beta_sqrtstep=np.array([0.25, 0, 0, 0, 0, 0]))
    nxt = daily_transition(m, initial_state(m), 0, 0, ZeroRng())
    assert nxt.heart == pytest.approx(87.5 + 10.0 * 0.5)
    assert nxt.sleep == pytest.approx(21600.0 - 5400.0)
    assert nxt.sqrtstep == pytest.approx(100.0 + 30.0 * 0.25)
    assert nxt.day == 2 and nxt.moods == initial_state(m).moods


def test_linear_predictor_matches_hand_computation():
    beta = np.array([0.1, 0.2, -0.3, 0.4, 0.5, -0.6])
    m = zero_model(beta_sqrtstep=beta)
    state = replace(initial_state(m), heart=97.5, sleep=16200.0, sqrtstep=130.0, moods=(6.5, 2.0))
    x = np.array([1.0, 1.0, -1.0, 1.0, 1.0, -2.0])
    want = float(x @ beta)
    nxt = daily_transition(m, state, 0, 0, ZeroRng())
    assert (nxt.sqrtstep - 100.0) / 30.0 == pytest.approx(want)


def test_sqrtstep_truncated_at_200():
    m = zero_model(beta_sqrtstep=np.array([5.0, 0, 0, 0, 0, 0]))  # 100 + 30 * 5 = 250
    assert daily_transition(m, initial_state(m), 0, 0, ZeroRng()).sqrtstep == 200.0


def test_actions_shift_sqrtstep_by_the_stated_effects():
    m = zero_model(beta_sqrtstep=np.array([0, 0, 0, 0.5, 0, 0.0]))
    s0 = initial_state(m)
    base = daily_transition(m, s0, 0, 0, ZeroRng()).sqrtstep
    high = daily_transition(m, s0, 1, 0, ZeroRng()).sqrtstep
    both = daily_transition(m, s0, 1, 1, ZeroRng()).sqrtstep
    assert (high - base) / 30 == pytest.approx(m.tau_high)
    assert (both - high) / 30 == pytest.approx(m.tau0)


def test_burden_advances_with_the_low_action():
    m = zero_model()
    s = initial_state(m)
    for a in (1, 1, 0):
        s = daily_transition(m, s, 0, a, ZeroRng())
    assert s.burden == pytest.approx(burden([1, 1, 0]))
    assert s.week_burdens == pytest.approx([burden([1]), burden([1, 1]), burden([1, 1, 0])])


def test_weekly_transition_resets_burden():
    m = zero_model()
    s = daily_transition(m, initial_state(m), 0, 1, ZeroRng())
    nxt = weekly_transition(m, s, 0, "none", ZeroRng())
    assert nxt.burden == 0.0 and nxt.week_burdens == [] and not nxt.disengaged_this_week
    assert nxt.week == 2 and nxt.day == 1


def test_mood_effect_variants():
    theta = np.array([0.0, 0.5, 0.0])
    m = zero_model(theta_mood_target=theta, theta_mood_partner=theta)
    s = initial_state(m)
    for effect, scale in MOOD_EFFECTS.items():
        lift = weekly_transition(m, s, 1, effect, ZeroRng()).moods[0] - weekly_transition(m, s, 0, effect,
                                                                                         ZeroRng()).moods[0]
        assert lift / 1.5 == pytest.approx(scale * 0.5)


def test_no_mood_effect_leaves_moods_unchanged_by_actions():
    m = synth_dyad_models(1, np.random.default_rng(0))[0]
    s = initial_state(m)
    a = weekly_transition(m, s, 1, "none", np.random.default_rng(5))
    b = weekly_transition(m, s, 0, "none", np.random.default_rng(5))
    assert a.moods == b.moods


def test_non_finite_coefficients_rejected():
    with pytest.raises(InvalidInputError):
        zero_model(beta_heart=np.array([np.nan, 0, 0, 0, 0, 0]))
    with pytest.raises(InvalidInputError):
        zero_model(beta_sleep=np.zeros(5))


def test_effect_config_validation():
    with pytest.raises(InvalidInputError):
        EffectConfig(b1_k=0)
    with pytest.raises(InvalidInputError):
        EffectConfig(mood_effect="huge")


# -- synthetic models and files ---------------------------------------------------------------

def test_synth_zero_models():
    assert synth_dyad_models(0, np.random.default_rng(0)) == []


def test_synth_models_satisfy_invariants():
    models = synth_dyad_models(49, np.random.default_rng(1))
    assert len(models) == 49
    for m in models:
        assert all(abs(m.residuals[v].rho) < 1 and m.residuals[v].std > 0 for v in VARIABLES)
        assert np.abs(np.linalg.eigvals(m.daily_matrix())).max() < 1
        assert np.abs(np.linalg.eigvals(m.mood_matrix())).max() < 1
        assert m.tau0 == m.beta_sqrtstep[SS] / 5
        assert m.tau1 == m.beta_sqrtstep[SS] / 10
        assert m.tau_high == m.beta_sqrtstep[SS] / 25
        for v in VARIABLES:
            lo, hi = BOUNDS[v]
            assert lo <= m.initial[v] <= hi


def test_synth_models_are_seed_determined():
    a = synth_dyad_models(5, np.random.default_rng(3))
    b = synth_dyad_models(5, np.random.default_rng(3))
    assert all(np.array_equal(x.beta_sqrtstep, y.beta_sqrtstep) and x.initial == y.initial for x, y in zip(a, b))


def test_model_file_roundtrip(tmp_path):
    models = synth_dyad_models(4, np.random.default_rng(2))
    path = tmp_path / "dyads.json"
    dump_dyad_models(models, path)
    back = ingest_dyad_models(path)
    assert len(back) == len(models)
    for a, b in zip(models, back):
        for name in ("beta_heart", "beta_sleep", "beta_sqrtstep", "theta_mood_target", "theta_mood_partner"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert a.residuals == b.residuals and a.stats == b.stats and a.initial == b.initial


def _write_doc(tmp_path, mutate):
    path = tmp_path / "dyads.json"
    dump_dyad_models(synth_dyad_models(2, np.random.default_rng(0)), path)
    doc = json.loads(path.read_text())
    mutate(doc)
    path.write_text(json.dumps(doc))
    return path


def test_missing_field_is_named(tmp_path):
    path = _write_doc(tmp_path, lambda d: d["dyads"][1].pop("beta_sleep"))
    with pytest.raises(ParseError, match="record 1.*beta_sleep"):
        ingest_dyad_models(path)


def test_wrong_arity_is_named(tmp_path):
    path = _write_doc(tmp_path, lambda d: d["dyads"][0]["theta_mood_partner"].append(0.0))
    with pytest.raises(ParseError, match="theta_mood_partner"):
        ingest_dyad_models(path)


def test_invariant_violation_rejected(tmp_path):
    def unstable(doc):
        doc["dyads"][0]["residuals"]["heart"]["rho"] = 1.5
    with pytest.raises(ParseError, match="record 0"):
        ingest_dyad_models(_write_doc(tmp_path, unstable))


def test_inconsistent_tau_rejected(tmp_path):
    def bad_tau(doc):
        doc["dyads"][0]["tau0"] += 1.0
    with pytest.raises(ParseError, match="tau0"):
        ingest_dyad_models(_write_doc(tmp_path, bad_tau))


def test_schema_version_required(tmp_path):
    with pytest.raises(ParseError):
        ingest_dyad_models(_write_doc(tmp_path, lambda d: d.pop("schema_version")))


# -- trials ------------------------------------------------------------------------------

MODELS = synth_dyad_models(49, np.random.default_rng(7))


def test_trial_is_seed_determined():
    a = run_trial(MODELS, "bandit", 3, 2, 7, rng=np.random.default_rng(1))
    b = run_trial(MODELS, "bandit", 3, 2, 7, rng=np.random.default_rng(1))
    assert np.array_equal(a.dyad_indices, b.dyad_indices)
    assert a.totals.tobytes() == b.totals.tobytes()


def test_one_dyad_one_week_records_seven_rewards():
    res = run_trial(MODELS, "dyadic", 1, 1, 7, rng=np.random.default_rng(0))
    assert len(res.rewards) == 1 and len(res.rewards[0]) == 7
    assert res.grand_total == pytest.approx(sum(res.rewards[0]))


def test_empty_model_list_rejected():
    with pytest.raises(InvalidInputError):
        run_trial([], "dyadic", 1, 1, 7)


def test_rewards_are_standardized_next_day_sqrtstep():
    env = TestbedEnv(MODELS[:1], EffectConfig(), np.random.default_rng(0), 1, 3)
    env.start_episode()
    env.start_block()
    env.set_high_action(0)
    r = env.step(1)
    mean, std = POPULATION_STATS["sqrtstep"]
    assert r == pytest.approx((env.state.sqrtstep - mean) / std)


def test_truncation_bounds_hold_along_trials():
    env = TestbedEnv(MODELS[:5], EffectConfig(1, 2, "extreme"), np.random.default_rng(3), 14, 7)
    rng = np.random.default_rng(4)
    for _ in range(5):
        env.start_episode()
        for _ in range(14):
            env.start_block()
            env.set_high_action(int(rng.integers(2)))
            for _ in range(7):
                env.step(int(rng.integers(2)))
                for v in VARIABLES:
                    lo, hi = BOUNDS[v]
                    assert lo <= env.state.raw(v) <= hi


# Under b2 = b(1) a second consecutive message disengages the dyad for the
# rest of the week.  The day-1 message itself lands at burden exactly b(1),
# which does not exceed b2, so its effect survives: always treating behaves
# exactly like treating on day 1 only.

def _totals(rule, seeds, effect):
    return np.array([run_trial(MODELS, fixed_policy(rule), 5, 14, 7, effect, np.random.default_rng(s)).grand_total
                     for s in seeds])


def test_instant_disengagement_leaves_only_the_first_message():
    effect = EffectConfig(b1_k=8, b2_k=1)
    always = _totals(lambda day: 1, range(5), effect)
    first_only = _totals(lambda day: int(day == 1), range(5), effect)
    assert np.array_equal(always, first_only)


def test_always_treat_beats_no_treatment_under_instant_disengagement():
    effect = EffectConfig(b1_k=8, b2_k=1)
    seeds = range(200)
    diff = _totals(lambda day: 1, seeds, effect) - _totals(lambda day: 0, seeds, effect)
    assert diff.mean() > 0
