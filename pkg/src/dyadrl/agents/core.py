"""Reference implementations of the posterior-sampling fits.

These functions build the regression problems row by row, exactly as the
algorithm boxes describe, and solve them with the dense routines in
:mod:`dyadrl.bayes`.  The runners in :mod:`dyadrl.agents.runner` use the
faster sufficient-statistic designs in :mod:`dyadrl.agents.designs`; tests
check the two against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..bayes import RegressionData, posterior, sample_weights
from ..errors import InvalidInputError

FeatureMap = Callable[[object, object], np.ndarray]


@dataclass
class LowEpisode:
    """H consecutive (composite state, low action, reward) tuples of one block.

    A composite state is (high state, high action, low state).
    """

    tuples: list

    def __post_init__(self):
        if not self.tuples:
            raise InvalidInputError("an episode needs at least one tuple")
        heads = {(_key(s[0]), _key(s[1])) for (s, _, _) in self.tuples}
        if len(heads) != 1:
            raise InvalidInputError("high state and high action must be constant within an episode")

    def __len__(self):
        return len(self.tuples)


def _key(x):
    arr = np.asarray(x)
    return arr.tobytes() if arr.ndim else x


@dataclass
class HighRecord:
    high_state: object
    high_action: int
    r_tilde: float
    first_low_state: object


@dataclass
class ThetaSchedule:
    low: list
    high: np.ndarray | None = None


@dataclass
class AgentConfig:
    lam: float = 1.0
    sigma: float = 1.0
    lam_ts: float = 1.0
    sigma_ts: float = 1.0
    theory: bool = False
    tie_break: str = "random"
    warm_start_episodes: int = 1
    gamma: float | None = None  # stationary RLSVI; None means 1 - 1/(H W)

    def __post_init__(self):
        for name in ("lam", "sigma", "lam_ts", "sigma_ts"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be positive, got {value}")
        if self.tie_break not in ("random", "first"):
            raise InvalidInputError(f"unknown tie-break rule {self.tie_break!r}")
        if self.warm_start_episodes < 0:
            raise InvalidInputError("warm_start_episodes must be nonnegative")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise InvalidInputError("gamma must lie in [0, 1]")


def _per_period(obj, H: int) -> list:
    if callable(obj):
        return [obj] * H
    obj = list(obj)
    if len(obj) != H:
        raise InvalidInputError(f"expected {H} per-period entries, got {len(obj)}")
    return obj


def _action_sets(actions, H: int) -> list:
    actions = list(actions)
    if actions and isinstance(actions[0], (list, tuple, np.ndarray, range)):
        if len(actions) != H:
            raise InvalidInputError(f"expected {H} per-period action sets, got {len(actions)}")
        return [list(a) for a in actions]
    return [actions] * H


def _max_value(theta, phi, state, actions) -> float:
    return max(float(theta @ phi(state, a)) for a in actions)


def rlsvi_fit(episodes: Sequence[LowEpisode], feature_maps, actions, lam: float, sigma: float,
              rng: np.random.Generator, dim: int | None = None) -> ThetaSchedule:
    """Randomized least-squares value iteration.

    ``feature_maps`` is one callable phi_h(state, action) per period (or a
    single callable used for all periods) and ``actions`` the action set, or
    one action set per period.  Draws theta_H first, then theta_{H-1}, ...
    """
    lengths = {len(ep) for ep in episodes}
    if len(lengths) > 1:
        raise InvalidInputError(f"episodes have inconsistent lengths {sorted(lengths)}")
    if episodes:
        H = lengths.pop()
    elif isinstance(feature_maps, (list, tuple)):
        H = len(feature_maps)
    else:
        raise InvalidInputError("the horizon cannot be inferred without episodes or per-period maps")
    maps = _per_period(feature_maps, H)
    acts = _action_sets(actions, H)
    if dim is None:
        dim = maps[0](*_probe(episodes, acts)).size
    thetas = [None] * H
    for h in reversed(range(H)):
        rows, targets = [], []
        for ep in episodes:
            s, a, r = ep.tuples[h]
            rows.append(maps[h](s, a))
            if h < H - 1:
                s_next = ep.tuples[h + 1][0]
                r = r + _max_value(thetas[h + 1], maps[h + 1], s_next, acts[h + 1])
            targets.append(r)
        post = posterior(RegressionData.from_rows(rows, targets, dim), lam, sigma)
        thetas[h] = sample_weights(post, rng)
    return ThetaSchedule(thetas)


def _probe(episodes, acts):
    if episodes:
        s, a, _ = episodes[0].tuples[0]
        return s, a
    raise InvalidInputError("pass dim= when fitting without data")


def ts_fit(records, psi: FeatureMap, lam_ts: float, sigma_ts: float, rng: np.random.Generator,
           dim: int | None = None) -> np.ndarray:
    """Thompson sampling draw for a linear reward model.

    ``records`` holds :class:`HighRecord` objects or (state, action, reward)
    triples.
    """
    triples = [(r.high_state, r.high_action, r.r_tilde) if isinstance(r, HighRecord) else r
               for r in records]
    rows = [psi(s, a) for s, a, _ in triples]
    if dim is None:
        if not rows:
            raise InvalidInputError("pass dim= when fitting without data")
        dim = rows[0].size
    data = RegressionData.from_rows(rows, [r for _, _, r in triples], dim)
    return sample_weights(posterior(data, lam_ts, sigma_ts), rng)


def stationary_design(episodes: Sequence[LowEpisode], phi: FeatureMap, actions, theta_prev,
                      gamma: float) -> RegressionData:
    """Stacked regression over every period of every episode."""
    rows, targets = [], []
    for ep in episodes:
        H = len(ep)
        acts = _action_sets(actions, H)
        for h, (s, a, r) in enumerate(ep.tuples):
            rows.append(phi(s, a))
            if h < H - 1:
                r = r + gamma * _max_value(theta_prev, phi, ep.tuples[h + 1][0], acts[h + 1])
            targets.append(r)
    return RegressionData.from_rows(rows, targets, np.asarray(theta_prev).size)


def stationary_rlsvi_fit(episodes, phi: FeatureMap, actions, theta_prev, lam: float, sigma: float,
                         gamma: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError("gamma must lie in [0, 1]")
    data = stationary_design(episodes, phi, actions, np.asarray(theta_prev, dtype=float), gamma)
    return sample_weights(posterior(data, lam, sigma), rng)


def argmax_random(values: np.ndarray, rng: np.random.Generator | None, rule: str = "random") -> int:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InvalidInputError("empty action set")
    first = int(values.argmax())
    if rule == "first" or rng is None:
        return first
    best = np.flatnonzero(values == values[first])
    if best.size == 1:
        return first
    return int(best[rng.integers(best.size)])


def argmax_probs(values: np.ndarray) -> np.ndarray:
    """Uniform distribution over the maximizers."""
    values = np.asarray(values, dtype=float)
    top = (values == values.max()).astype(float)
    return top / top.sum()


def select_action(theta, feature_map: FeatureMap, state, action_set, rng=None, tie_break="random"):
    """An action in argmax_a theta' phi(state, a), ties broken by ``tie_break``."""
    action_set = list(action_set)
    if not action_set:
        raise InvalidInputError("empty action set")
    values = [float(np.dot(theta, feature_map(state, a))) for a in action_set]
    return action_set[argmax_random(np.array(values), rng, tie_break)]


def relabel_high_rewards(records: Sequence[HighRecord], theta_1, phi_1, low_action_set) -> None:
    """Set every record's r_tilde to max_a theta_1' phi_1(s_high, a_high, s_low_1, a)."""
    low_action_set = list(low_action_set)
    for rec in records:
        state = (rec.high_state, rec.high_action, rec.first_low_state)
        rec.r_tilde = _max_value(theta_1, phi_1, state, low_action_set)


def composite_phi(features) -> FeatureMap:
    """Adapt a features object to the phi(state, action) signature.

    ``state`` is (high state, high action, low state) and ``action`` a low
    action, or a (high action, low action) pair for the first period of a
    block when the high action is chosen jointly.
    """

    def phi(state, action):
        sh, ah, sl = state
        if isinstance(action, tuple):
            ah, action = action
        return _dense(features, features.phi(sh, ah, sl, action), features.dim)

    return phi


def high_psi(features) -> FeatureMap:
    def psi(sh, ah):
        return _dense(features, features.psi(sh, ah), features.high_dim)

    return psi


def _dense(features, encoded, dim):
    if features.onehot:
        out = np.zeros(dim)
        out[encoded] = 1.0
        return out
    return np.asarray(encoded, dtype=float)
