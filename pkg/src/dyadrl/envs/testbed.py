"""Synthetic dyadic mobile-health test bed.

Each dyad (target person, care partner) follows per-dyad linear dynamics in
standardized units: daily heart rate, sleep and square-root step count of
the target person, and the weekly moods of both members.  Residuals are
AR(1).  States are stored in raw units and truncated to their ranges after
every transition; agents see standardized values.

Treatment enters the square-root step count only.  The daily effect shrinks
once the weekly burden reaches ``b1`` and vanishes for the rest of the week
once any burden that week exceeds ``b2``.  The weekly action adds a constant
daily effect and, in the mood-effect variants, shifts both weekly moods.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ConfigError, InvalidInputError, ParseError
from ..features import LinearFeatures

GAMMA = 1.0 - 1.0 / 7.0
SCHEMA_VERSION = 1
DAILY = ("heart", "sleep", "sqrtstep")
MOODS = ("mood_target", "mood_partner")
VARIABLES = DAILY + MOODS
SS = 3  # position of the sqrtstep slope in a daily coefficient vector
BOUNDS = {
    "heart": (55.0, 120.0),
    "sleep": (0.0, 43200.0),
    "sqrtstep": (0.0, 200.0),
    "mood_target": (0.0, 10.0),
    "mood_partner": (0.0, 10.0),
}
POPULATION_STATS = {
    "heart": (87.5, 10.0),
    "sleep": (21600.0, 5400.0),
    "sqrtstep": (100.0, 30.0),
    "mood_target": (5.0, 1.5),
    "mood_partner": (5.0, 1.5),
}
MOOD_EFFECTS = {"none": 0.0, "weak": 1 / 50, "strong": 1 / 25, "extreme": 2 / 25}


@dataclass(frozen=True)
class Residual:
    rho: float
    std: float


@dataclass(frozen=True)
class DyadModel:
    """Coefficients of one dyad, all in standardized units.

    Daily vectors are ordered (intercept, heart, sleep, sqrtstep, own mood,
    partner mood); mood vectors (intercept, target mood, partner mood).
    """

    beta_heart: np.ndarray
    beta_sleep: np.ndarray
    beta_sqrtstep: np.ndarray
    theta_mood_target: np.ndarray
    theta_mood_partner: np.ndarray
    residuals: dict
    stats: dict = field(default_factory=lambda: dict(POPULATION_STATS))
    initial: dict = field(default_factory=lambda: {v: POPULATION_STATS[v][0] for v in VARIABLES})

    def __post_init__(self):
        for name, size in (("beta_heart", 6), ("beta_sleep", 6), ("beta_sqrtstep", 6),
                           ("theta_mood_target", 3), ("theta_mood_partner", 3)):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (size,):
                raise InvalidInputError(f"{name} must have {size} entries, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)
        for v in VARIABLES:
            for what, table in (("residuals", self.residuals), ("stats", self.stats),
                                ("initial", self.initial)):
                if v not in table:
                    raise InvalidInputError(f"{what} lacks an entry for {v}")
            res = self.residuals[v]
            if not (abs(res.rho) < 1 and res.std > 0):
                raise InvalidInputError(f"residual model for {v} needs |rho| < 1 and std > 0")
            mean, std = self.stats[v]
            if not std > 0:
                raise InvalidInputError(f"standardization std for {v} must be positive")
            lo, hi = BOUNDS[v]
            if not lo <= self.initial[v] <= hi:
                raise InvalidInputError(f"initial {v} = {self.initial[v]} outside [{lo}, {hi}]")

    @property
    def tau0(self) -> float:
        return self.beta_sqrtstep[SS] / 5

    @property
    def tau1(self) -> float:
        return self.beta_sqrtstep[SS] / 10

    @property
    def tau_high(self) -> float:
        return self.beta_sqrtstep[SS] / 25

    def tau_mood(self, mood_effect: str) -> float:
        if mood_effect not in MOOD_EFFECTS:
            raise InvalidInputError(f"unknown mood effect {mood_effect!r}")
        return MOOD_EFFECTS[mood_effect] * self.theta_mood_target[1]

    def daily_matrix(self) -> np.ndarray:
        return np.stack([self.beta_heart[1:4], self.beta_sleep[1:4], self.beta_sqrtstep[1:4]])

    def mood_matrix(self) -> np.ndarray:
        return np.stack([self.theta_mood_target[1:], self.theta_mood_partner[1:]])


@dataclass(frozen=True)
class EffectConfig:
    b1_k: int = 8
    b2_k: int = 8
    mood_effect: str = "none"

    def __post_init__(self):
        for name in ("b1_k", "b2_k"):
            k = getattr(self, name)
            if not (isinstance(k, (int, np.integer)) and 1 <= k <= 8):
                raise InvalidInputError(f"{name} must be an integer in 1..8, got {k!r}")
        if self.mood_effect not in MOOD_EFFECTS:
            raise InvalidInputError(f"mood_effect must be one of {tuple(MOOD_EFFECTS)}")

    @property
    def b1(self) -> float:
        return b_threshold(self.b1_k)

    @property
    def b2(self) -> float:
        return b_threshold(self.b2_k)


def burden(week_actions: Sequence[int], gamma: float = GAMMA) -> float:
    """(1 - gamma) * sum_s A_s gamma^(h - s) over the current week's actions."""
    if len(week_actions) > 7:
        raise InvalidInputError("a week has at most 7 days")
    b = 0.0
    for a in week_actions:
        b = gamma * b + (1.0 - gamma) * a
    return b


def b_threshold(k: int) -> float:
    """Burden after k consecutive daily actions; equals 1 - gamma^k."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise InvalidInputError(f"k must be a positive integer, got {k!r}")
    b = 0.0
    for _ in range(k):
        b = GAMMA * b + (1.0 - GAMMA)
    return b


def effective_low_effect(model: DyadModel, week_burdens: Sequence[float], b1: float, b2: float) -> float:
    """Daily effect given this week's burdens up to and including today."""
    if not (0 < b1 < 1 and 0 < b2 < 1):
        raise InvalidInputError("thresholds must lie in (0, 1)")
    if not len(week_burdens):
        return model.tau0
    if max(week_burdens) > b2:
        return 0.0
    return model.tau0 - (week_burdens[-1] >= b1) * model.tau1


@dataclass
class DyadState:
    week: int
    day: int
    heart: float
    sleep: float
    sqrtstep: float
    moods: tuple
    burden: float = 0.0
    week_burdens: list = field(default_factory=list)
    disengaged_this_week: bool = False
    carry: dict = field(default_factory=lambda: {v: 0.0 for v in VARIABLES})

    def raw(self, name: str) -> float:
        if name in MOODS:
            return self.moods[MOODS.index(name)]
        return getattr(self, name)


def initial_state(model: DyadModel) -> DyadState:
    init = model.initial
    return DyadState(1, 1, init["heart"], init["sleep"], init["sqrtstep"],
                     (init["mood_target"], init["mood_partner"]))


def _z(model: DyadModel, name: str, raw: float) -> float:
    mean, std = model.stats[name]
    return (raw - mean) / std


def _raw(model: DyadModel, name: str, z: float) -> float:
    mean, std = model.stats[name]
    lo, hi = BOUNDS[name]
    return float(min(max(mean + std * z, lo), hi))


def standardized_low(model: DyadModel, state: DyadState) -> np.ndarray:
    return np.array([_z(model, v, state.raw(v)) for v in DAILY])


def standardized_high(model: DyadModel, state: DyadState) -> np.ndarray:
    return np.array([_z(model, v, state.raw(v)) for v in MOODS])


def daily_transition(model: DyadModel, state: DyadState, a_high: int, a_low: int, rng: np.random.Generator,
                     effect: EffectConfig | None = None) -> DyadState:
    """Advance one day.  Draws exactly three normals whatever the actions."""
    effect = effect or EffectConfig()
    noise = rng.standard_normal(3)
    x = np.concatenate([[1.0], standardized_low(model, state), standardized_high(model, state)])
    week_burdens = state.week_burdens + [GAMMA * state.burden + (1.0 - GAMMA) * a_low]
    disengaged = state.disengaged_this_week or week_burdens[-1] > effect.b2
    tau_low = effective_low_effect(model, week_burdens, effect.b1, effect.b2)
    carry = dict(state.carry)
    values = {}
    for i, (name, beta) in enumerate(zip(DAILY, (model.beta_heart, model.beta_sleep, model.beta_sqrtstep))):
        res = model.residuals[name]
        carry[name] = res.rho * state.carry[name] + res.std * noise[i]
        z = float(x @ beta) + carry[name]
        if name == "sqrtstep":
            z += model.tau_high * a_high + tau_low * a_low
        values[name] = _raw(model, name, z)
    return DyadState(state.week, state.day + 1, values["heart"], values["sleep"], values["sqrtstep"],
                     state.moods, week_burdens[-1], week_burdens, disengaged, carry)


def weekly_transition(model: DyadModel, state: DyadState, a_high: int, mood_effect: str,
                      rng: np.random.Generator) -> DyadState:
    """Next week's moods; resets the weekly burden.  Draws exactly two normals."""
    noise = rng.standard_normal(2)
    x = np.concatenate([[1.0], standardized_high(model, state)])
    tau = model.tau_mood(mood_effect)
    carry = dict(state.carry)
    moods = []
    for i, (name, theta) in enumerate(zip(MOODS, (model.theta_mood_target, model.theta_mood_partner))):
        res = model.residuals[name]
        carry[name] = res.rho * state.carry[name] + res.std * noise[i]
        moods.append(_raw(model, name, float(x @ theta) + tau * a_high + carry[name]))
    return DyadState(state.week + 1, 1, state.heart, state.sleep, state.sqrtstep, tuple(moods),
                     carry=carry)


# -- synthetic coefficients ---------------------------------------------------

@dataclass(frozen=True)
class GeneratorConfig:
    ar_slope: tuple = (0.2, 0.6)
    cross_slope: tuple = (-0.1, 0.1)
    mood_ar_slope: tuple = (0.3, 0.7)
    residual_rho: tuple = (0.2, 0.5)
    intercept: tuple = (-0.1, 0.1)
    residual_sd: float = 1.0  # marginal residual std in standardized units
    initial_sd: float = 0.5   # spread of the starting state around the population mean
    max_tries: int = 100


def _stable(model: DyadModel) -> bool:
    radius = max(np.abs(np.linalg.eigvals(model.daily_matrix())).max(),
                 np.abs(np.linalg.eigvals(model.mood_matrix())).max())
    return radius < 1.0


def _draw_model(rng: np.random.Generator, cfg: GeneratorConfig) -> DyadModel:
    def u(bounds, size=None):
        return rng.uniform(bounds[0], bounds[1], size)

    daily = []
    for i in range(3):
        beta = np.empty(6)
        beta[0] = u(cfg.intercept)
        beta[1:4] = u(cfg.cross_slope, 3)
        beta[1 + i] = u(cfg.ar_slope)
        beta[4:] = u(cfg.cross_slope, 2)
        daily.append(beta)
    moods = []
    for i in range(2):
        theta = np.empty(3)
        theta[0] = u(cfg.intercept)
        theta[1:] = u(cfg.cross_slope, 2)
        theta[1 + i] = u(cfg.mood_ar_slope)
        moods.append(theta)
    residuals = {}
    for v in VARIABLES:
        rho = float(u(cfg.residual_rho))
        residuals[v] = Residual(rho, float(cfg.residual_sd * np.sqrt(1 - rho ** 2)))
    initial = {}
    for v in VARIABLES:
        mean, std = POPULATION_STATS[v]
        lo, hi = BOUNDS[v]
        initial[v] = float(min(max(mean + std * cfg.initial_sd * rng.standard_normal(), lo), hi))
    return DyadModel(*daily, *moods, residuals, dict(POPULATION_STATS), initial)


def synth_dyad_models(n: int = 49, rng: np.random.Generator | None = None,
                      gen_config: GeneratorConfig | None = None) -> list:
    """Draw n dyad models; unstable draws are rejected and redrawn."""
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    rng = rng if rng is not None else np.random.default_rng()
    cfg = gen_config or GeneratorConfig()
    out = []
    for _ in range(n):
        for _ in range(cfg.max_tries):
            model = _draw_model(rng, cfg)
            if _stable(model):
                out.append(model)
                break
        else:
            raise ConfigError(f"no stable dyad model after {cfg.max_tries} draws; check the generator ranges")
    return out


# -- model files ----------------------------------------------------------------

def _model_record(model: DyadModel) -> dict:
    rec = {name: getattr(model, name).tolist() for name in
           ("beta_heart", "beta_sleep", "beta_sqrtstep", "theta_mood_target", "theta_mood_partner")}
    rec["residuals"] = {v: {"rho": r.rho, "std": r.std} for v, r in model.residuals.items()}
    rec["stats"] = {v: {"mean": m, "std": s} for v, (m, s) in model.stats.items()}
    rec["initial"] = dict(model.initial)
    rec["tau0"], rec["tau1"], rec["tau_high"] = model.tau0, model.tau1, model.tau_high
    return rec


def dump_dyad_models(models: Sequence[DyadModel], path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "dyads": [_model_record(m) for m in models]}
    Path(path).write_text(json.dumps(doc, indent=1))


def _field(rec: dict, i: int, name: str):
    if name not in rec:
        raise ParseError(f"dyad record {i}: missing field {name!r}")
    return rec[name]


def _vector(rec, i, name, size):
    value = _field(rec, i, name)
    if not isinstance(value, list) or len(value) != size:
        raise ParseError(f"dyad record {i}: field {name!r} must be a list of {size} numbers")
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"dyad record {i}: field {name!r} is not numeric") from exc


def _parse_record(rec, i) -> DyadModel:
    if not isinstance(rec, dict):
        raise ParseError(f"dyad record {i}: expected an object")
    vectors = [_vector(rec, i, name, size) for name, size in
               (("beta_heart", 6), ("beta_sleep", 6), ("beta_sqrtstep", 6),
                ("theta_mood_target", 3), ("theta_mood_partner", 3))]
    try:
        residuals = {v: Residual(float(r["rho"]), float(r["std"]))
                     for v, r in _field(rec, i, "residuals").items()}
        stats = {v: (float(s["mean"]), float(s["std"])) for v, s in _field(rec, i, "stats").items()}
        initial = {v: float(x) for v, x in _field(rec, i, "initial").items()}
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(f"dyad record {i}: malformed residuals/stats/initial ({exc})") from exc
    try:
        model = DyadModel(*vectors, residuals, stats, initial)
    except InvalidInputError as exc:
        raise ParseError(f"dyad record {i}: {exc}") from exc
    for name in ("tau0", "tau1", "tau_high"):
        if name in rec and not np.isclose(rec[name], getattr(model, name), rtol=1e-12, atol=1e-15):
            raise ParseError(f"dyad record {i}: field {name!r} disagrees with beta_sqrtstep")
    return model


def ingest_dyad_models(path) -> list:
    """Load and check a dyad-model file written by :func:`dump_dyad_models`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"{path}: expected schema_version {SCHEMA_VERSION}")
    dyads = doc.get("dyads")
    if not isinstance(dyads, list):
        raise ParseError(f"{path}: missing field 'dyads'")
    return [_parse_record(rec, i) for i, rec in enumerate(dyads)]


# -- environment --------------------------------------------------------------------

class TestbedEnv:
    """Sequential interface for the agents; one episode per dyad in ``dyads``."""

    tabular = False
    __test__ = False  # keep pytest from collecting this class

    def __init__(self, dyads: Sequence[DyadModel], effect: EffectConfig, rng: np.random.Generator,
                 n_blocks: int = 14, n_periods: int = 7):
        if not dyads:
            raise InvalidInputError("the test bed needs at least one dyad")
        if n_periods > 7:
            raise InvalidInputError("a week has at most 7 days")
        self.dyads = list(dyads)
        self.effect = effect
        self.rng = rng
        self.n_blocks = n_blocks
        self.n_periods = n_periods
        self.features = LinearFeatures(high_dim=2, low_dim=3)
        self._episode = -1
        self.model: DyadModel | None = None
        self.state: DyadState | None = None
        self.rewards: list = []

    def start_episode(self) -> None:
        self._episode += 1
        if self._episode >= len(self.dyads):
            raise InvalidInputError("no dyads left in the sequence")
        self.model = self.dyads[self._episode]
        self.state = initial_state(self.model)
        self._blocks = 0
        self._a_high = None
        self.rewards.append([])

    def start_block(self) -> np.ndarray:
        if self._blocks >= self.n_blocks:
            raise InvalidInputError("episode already has all its blocks")
        if self._blocks > 0:
            self.state = weekly_transition(self.model, self.state, self._a_high,
                                           self.effect.mood_effect, self.rng)
        self._blocks += 1
        self._a_high = None
        return standardized_high(self.model, self.state)

    def set_high_action(self, a: int) -> None:
        self._a_high = int(a)

    def low_state(self) -> np.ndarray:
        return standardized_low(self.model, self.state)

    def step(self, a_low: int) -> float:
        if self._a_high is None:
            raise InvalidInputError("set the weekly action before stepping")
        if self.state.day > self.n_periods:
            raise InvalidInputError("the week is over")
        self.state = daily_transition(self.model, self.state, self._a_high, int(a_low), self.rng, self.effect)
        reward = _z(self.model, "sqrtstep", self.state.sqrtstep)
        self.rewards[-1].append(reward)
        return reward


@dataclass
class TrialResult:
    dyad_indices: np.ndarray
    totals: np.ndarray
    rewards: list

    @property
    def grand_total(self) -> float:
        return float(self.totals.sum())


def run_trial(models: Sequence[DyadModel], algo, n_dyads: int = 100, W: int = 14, H: int = 7,
              effect: EffectConfig | None = None, rng: np.random.Generator | None = None,
              config=None) -> TrialResult:
    """Simulate one trial of ``n_dyads`` sampled with replacement.

    ``algo`` is an algorithm name or a callable ``policy(env) -> None`` that
    plays every episode itself (used for fixed reference policies).
    Dyad sampling, environment noise and agent randomness use separate
    streams seeded from ``rng``, so two algorithms given equally seeded
    generators face the same dyads and the same noise.
    """
    from ..agents.runner import run_algorithm

    if not models:
        raise InvalidInputError("run_trial needs at least one dyad model")
    if n_dyads < 1:
        raise InvalidInputError("n_dyads must be positive")
    effect = effect or EffectConfig()
    rng = rng if rng is not None else np.random.default_rng()
    idx = rng.integers(len(models), size=n_dyads)
    env_seed, agent_seed = rng.integers(2 ** 63, size=2)
    env = TestbedEnv([models[i] for i in idx], effect, np.random.default_rng(env_seed), W, H)
    if callable(algo):
        for _ in range(n_dyads):
            algo(env)
    else:
        run_algorithm(algo, env, n_dyads, W, H, config, np.random.default_rng(agent_seed))
    totals = np.array([sum(r) for r in env.rewards])
    return TrialResult(idx, totals, env.rewards)


def fixed_policy(low_rule, high_action: int = 0):
    """Reference policy for :func:`run_trial`: ``low_rule(day) -> 0/1`` each day."""

    def play(env: TestbedEnv) -> None:
        env.start_episode()
        for _ in range(env.n_blocks):
            env.start_block()
            env.set_high_action(high_action)
            for day in range(1, env.n_periods + 1):
                env.step(low_rule(day))

    return play
