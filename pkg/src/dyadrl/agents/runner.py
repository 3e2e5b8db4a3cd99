"""Episode loops for dyadic RL and the three baselines.

Environments expose ``features``, ``n_blocks``, ``n_periods`` and the calls
``start_episode()``, ``start_block() -> high state``, ``low_state()``,
``set_high_action(a)`` and ``step(a) -> reward``.  ``low_state`` may be
called before the high action is set.

An optional ``evaluator(high_state, policy, block_reward)`` is called at the
end of every block and returns ``(v_star, v_pi)``; ``policy`` is the
:class:`BlockPolicy` that generated the block, or ``None`` when the policy
changed inside the block (bandit).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InvalidInputError
from ..evaluation.oracle import theory_hyperparams
from ..features import feature_values
from .core import AgentConfig, argmax_probs, argmax_random
from .designs import DenseDesign, IndexDesign, RelabeledDesign

ALGORITHMS = ("dyadic", "full", "stationary", "bandit")


@dataclass
class BlockPolicy:
    """Policy in force during one block.

    ``high_probs`` is the distribution of the high action at the observed
    high state; ``low_thetas[h]`` are the weights acted on greedily in period
    h + 1.  ``uniform`` marks warm-start blocks.
    """

    high_probs: np.ndarray
    low_thetas: list | None = None
    uniform: bool = False


@dataclass
class BlockRecord:
    episode: int
    block: int
    high_state: object
    high_action: int
    low_states: list
    low_actions: list
    rewards: np.ndarray
    v_star: float | None = None
    v_pi: float | None = None
    r_tilde: float | None = None  # dyadic only: this block's relabeled high-level reward

    @property
    def block_reward(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def regret(self) -> float | None:
        if self.v_star is None:
            return None
        return self.v_star - self.v_pi


@dataclass
class RunHistory:
    algo: str
    K: int
    W: int
    H: int
    blocks: list = field(default_factory=list)

    def block_rewards(self) -> np.ndarray:
        return np.array([b.block_reward for b in self.blocks]).reshape(self.K, self.W)

    def regrets(self) -> np.ndarray | None:
        if not self.blocks or self.blocks[0].v_star is None:
            return None
        return np.array([b.regret for b in self.blocks]).reshape(self.K, self.W)


def _new_design(features, dim, width):
    return IndexDesign(dim, width) if features.onehot else DenseDesign(dim, width)


def state_action_sizes(features) -> tuple[int, int]:
    """|S| and |A| of the block MDP implied by a tabular feature map.

    Composite states carry an extra "not yet chosen" level for the high
    action and an extra period-0 level for the low state.
    """
    if not features.onehot:
        raise ConfigError("theory-mode hyperparameters need tabular (one-hot) features")
    n_high, n_ah, n_low, n_al = features.spec.cardinalities
    return n_high * (n_ah + 1) * (n_low + 1), n_ah + n_al


class _Hyper:
    def __init__(self, config: AgentConfig, features, H: int):
        self.config = config
        if config.theory:
            self.H = H
            self.size_S, self.size_A = state_action_sizes(features)

    def low(self, n: int) -> tuple[float, float]:
        if self.config.theory:
            return theory_hyperparams(self.H, self.size_S, self.size_A, max(n, 1))
        return self.config.lam, self.config.sigma

    def high(self, n: int) -> tuple[float, float]:
        if self.config.theory:
            return theory_hyperparams(self.H, self.size_S, self.size_A, max(n, 1))
        return self.config.lam_ts, self.config.sigma_ts


def _key(sh):
    return sh if np.ndim(sh) == 0 else np.asarray(sh).tobytes()


class _Runner:
    def __init__(self, env, K, W, H, config, rng, evaluator):
        if getattr(env, "n_blocks", W) != W or getattr(env, "n_periods", H) != H:
            raise InvalidInputError(
                f"environment is built for W={env.n_blocks}, H={env.n_periods}; got W={W}, H={H}")
        if K < 1 or W < 1 or H < 1:
            raise InvalidInputError("K, W and H must be positive")
        self.env, self.K, self.W, self.H = env, K, W, H
        self.config, self.rng, self.evaluator = config, rng, evaluator
        self.features = env.features
        self.hyper = _Hyper(config, self.features, H)
        self.visits: dict = {}
        self.n_blocks_seen = 0

    def warm(self, k: int) -> bool:
        return k < self.config.warm_start_episodes

    def choose(self, values, k) -> int:
        if self.warm(k):
            return int(self.rng.integers(len(values)))
        return argmax_random(values, self.rng, self.config.tie_break)

    def finish_block(self, history, k, w, sh, ah, states, actions, rewards, policy, has_policy=True):
        rec = BlockRecord(k, w, sh, ah, states, actions, np.asarray(rewards, dtype=float))
        if self.evaluator is not None:
            rec.v_star, rec.v_pi = self.evaluator(sh, policy if has_policy else None, rec.block_reward)
        history.blocks.append(rec)
        key = _key(sh)
        self.visits[key] = self.visits.get(key, 0) + 1
        self.n_blocks_seen += 1

    def high_probs(self, values, k) -> np.ndarray:
        if self.warm(k):
            return np.full(len(values), 1.0 / len(values))
        return argmax_probs(values)

    # -- dyadic RL ---------------------------------------------------------
    def dyadic(self) -> RunHistory:
        env, f, H, rng = self.env, self.features, self.H, self.rng
        hist = RunHistory("dyadic", self.K, self.W, H)
        low = [_new_design(f, f.dim, f.n_low_actions) for _ in range(H)]
        high = RelabeledDesign(f.high_dim, f.onehot)
        for k in range(self.K):
            env.start_episode()
            for w in range(self.W):
                sh = env.start_block()
                n = self.visits.get(_key(sh), 0)
                lam_ts, sig_ts = self.hyper.high(n)
                lam, sig = self.hyper.low(n)
                beta = high.fit(lam_ts, sig_ts, rng)
                hv = feature_values(beta, f.high_options(sh))
                ah = self.choose(hv, k)
                env.set_high_action(ah)
                thetas = [None] * H
                for h in reversed(range(H)):
                    nxt = thetas[h + 1] if h + 1 < H else None
                    thetas[h] = low[h].fit(lam, sig, rng, nxt)
                states, actions, rewards, opts = [], [], [], []
                for h in range(H):
                    sl = env.low_state()
                    o = f.low_options(sh, ah, sl)
                    al = self.choose(feature_values(thetas[h], o), k)
                    rewards.append(env.step(al))
                    states.append(sl)
                    actions.append(al)
                    opts.append(o)
                for h in range(H):
                    low[h].add(opts[h][actions[h]], rewards[h], opts[h + 1] if h + 1 < H else None)
                high.add(f.psi(sh, ah), opts[0])
                r_tilde = high.relabel(thetas[0])
                policy = BlockPolicy(self.high_probs(hv, k), thetas, self.warm(k))
                self.finish_block(hist, k, w, sh, ah, states, actions, rewards, policy)
                hist.blocks[-1].r_tilde = float(r_tilde[-1])
        return hist

    # -- full RL and stationary RLSVI ----------------------------------------
    def _episodic(self, stationary: bool) -> RunHistory:
        env, f, H, W, rng = self.env, self.features, self.H, self.W, self.rng
        T = H * W
        width = max(f.n_low_actions, len(f.joint_actions))
        gamma = self.config.gamma if self.config.gamma is not None else 1.0 - 1.0 / T
        hist = RunHistory("stationary" if stationary else "full", self.K, W, H)
        if stationary:
            shared = _new_design(f, f.dim, width)
            designs = [shared] * T
            theta_prev = np.zeros(f.dim)
        else:
            designs = [_new_design(f, f.dim, width) for _ in range(T)]
        for k in range(self.K):
            lam, sig = self.hyper.low(self.n_blocks_seen)
            if stationary:
                theta = shared.fit(lam, sig, rng, theta_prev, gamma)
                thetas = [theta] * T
                theta_prev = theta
            else:
                thetas = [None] * T
                for t in reversed(range(T)):
                    thetas[t] = designs[t].fit(lam, sig, rng, thetas[t + 1] if t + 1 < T else None)
            env.start_episode()
            pending = None
            for w in range(W):
                sh = env.start_block()
                states, actions, rewards = [], [], []
                for h in range(H):
                    t = w * H + h
                    sl = env.low_state()
                    if h == 0:
                        o = f.joint_options(sh, sl)
                        jv = feature_values(thetas[t], o)
                        j = self.choose(jv, k)
                        ah, al = f.joint_actions[j]
                        env.set_high_action(ah)
                        x = o[j]
                    else:
                        o = f.low_options(sh, ah, sl)
                        al = self.choose(feature_values(thetas[t], o), k)
                        x = o[al]
                    if pending is not None:
                        pending[0].add(pending[1], pending[2], o)
                    r = env.step(al)
                    pending = (designs[t], x, r)
                    states.append(sl)
                    actions.append(al)
                    rewards.append(r)
                policy = BlockPolicy(self._marginal_high(jv, k), thetas[w * H:(w + 1) * H], self.warm(k))
                self.finish_block(hist, k, w, sh, ah, states, actions, rewards, policy)
            pending[0].add(pending[1], pending[2], None)
        return hist

    def _marginal_high(self, joint_values, k) -> np.ndarray:
        f = self.features
        n_ah = f.n_high_actions
        if self.warm(k):
            return np.full(n_ah, 1.0 / n_ah)
        probs = argmax_probs(joint_values)
        out = np.zeros(n_ah)
        for p, (ah, _) in zip(probs, f.joint_actions):
            out[ah] += p
        return out

    # -- bandit --------------------------------------------------------------
    def bandit(self) -> RunHistory:
        env, f, H, rng = self.env, self.features, self.H, self.rng
        hist = RunHistory("bandit", self.K, self.W, H)
        data = _new_design(f, f.dim, 1)
        for k in range(self.K):
            env.start_episode()
            for w in range(self.W):
                sh = env.start_block()
                lam, sig = self.hyper.high(self.visits.get(_key(sh), 0))
                states, actions, rewards = [], [], []
                for h in range(H):
                    sl = env.low_state()
                    theta = data.fit(lam, sig, rng)
                    if h == 0:
                        o = f.joint_options(sh, sl)
                        j = self.choose(feature_values(theta, o), k)
                        ah, al = f.joint_actions[j]
                        env.set_high_action(ah)
                        x = o[j]
                    else:
                        o = f.low_options(sh, ah, sl)
                        al = self.choose(feature_values(theta, o), k)
                        x = o[al]
                    r = env.step(al)
                    data.add(x, r)
                    states.append(sl)
                    actions.append(al)
                    rewards.append(r)
                self.finish_block(hist, k, w, sh, ah, states, actions, rewards, None, has_policy=False)
        return hist


def run_algorithm(algo: str, env, K: int, W: int, H: int, config: AgentConfig | None = None,
                  rng: np.random.Generator | None = None, evaluator=None) -> RunHistory:
    """Run one of ``dyadic``, ``full``, ``stationary`` or ``bandit`` for K episodes."""
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    config = config or AgentConfig()
    rng = rng if rng is not None else np.random.default_rng()
    runner = _Runner(env, K, W, H, config, rng, evaluator)
    if algo == "dyadic":
        return runner.dyadic()
    if algo == "bandit":
        return runner.bandit()
    return runner._episodic(stationary=algo == "stationary")
