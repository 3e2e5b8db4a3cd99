"""Exact dynamic-programming oracle for block MDPs, and the regret bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidInputError


@dataclass
class BlockMDP:
    """Finite-horizon MDP over the periods 0..n-1 of one block.

    ``transitions[h]`` has shape (S_h, A_h, S_{h+1}) and ``rewards[h]`` shape
    (S_h, A_h); the last period has rewards but no transition (V_n = 0).
    ``initial`` is the distribution of the period-0 state.
    """

    transitions: list
    rewards: list
    initial: np.ndarray | None = None
    _sparse: list = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.rewards = [np.asarray(r, dtype=float) for r in self.rewards]
        self.transitions = [np.asarray(p, dtype=float) for p in self.transitions]
        if len(self.transitions) != len(self.rewards) - 1:
            raise InvalidInputError(
                f"{len(self.rewards)} reward periods need {len(self.rewards) - 1} transition tensors"
            )
        for h, R in enumerate(self.rewards):
            if R.ndim != 2 or not np.all(np.isfinite(R)):
                raise InvalidInputError(f"rewards[{h}] must be a finite (S, A) array")
        for h, P in enumerate(self.transitions):
            S, A = self.rewards[h].shape
            if P.ndim != 3 or P.shape[:2] != (S, A) or P.shape[2] != self.rewards[h + 1].shape[0]:
                raise InvalidInputError(f"transitions[{h}] has shape {P.shape}, incompatible with rewards")
            if (P < 0).any() or np.abs(P.sum(axis=2) - 1).max() > 1e-12:
                raise InvalidInputError(f"transitions[{h}] rows must be distributions")
        if self.initial is not None:
            self.initial = np.asarray(self.initial, dtype=float)
            if self.initial.shape != (self.rewards[0].shape[0],) or abs(self.initial.sum() - 1) > 1e-12:
                raise InvalidInputError("initial distribution does not match period-0 states")
        self._sparse = [_sparsify(P) for P in self.transitions]

    @property
    def horizon(self) -> int:
        return len(self.rewards)

    def rewards_in_unit_interval(self) -> bool:
        return all(((R >= 0) & (R <= 1)).all() for R in self.rewards)

    def _expected_next(self, h: int, v_next: np.ndarray) -> np.ndarray:
        idx, prob = self._sparse[h]
        return (prob * v_next[idx]).sum(axis=2)


def _sparsify(P: np.ndarray):
    """Gather form of a transition tensor: (S, A, m) indices and probabilities."""
    nnz = (P > 0).sum(axis=2)
    m = max(int(nnz.max()), 1)
    order = np.argsort(P <= 0, axis=2, kind="stable")[:, :, :m]
    prob = np.take_along_axis(P, order, axis=2)
    return order, prob


def optimal_values(mdp: BlockMDP) -> list:
    """V*_h for every period by backward induction."""
    values = [None] * mdp.horizon
    v_next = None
    for h in reversed(range(mdp.horizon)):
        q = mdp.rewards[h].copy()
        if v_next is not None:
            q += mdp._expected_next(h, v_next)
        v_next = q.max(axis=1)
        values[h] = v_next
    return values


def optimal_block_values(mdp: BlockMDP) -> np.ndarray:
    return optimal_values(mdp)[0]


def _policy_probs(policy_h, n_states: int, n_actions: int, h: int) -> np.ndarray:
    pol = np.asarray(policy_h)
    if pol.dtype.kind in "iu":
        if pol.shape != (n_states,) or (pol < 0).any() or (pol >= n_actions).any():
            raise InvalidInputError(f"policy for period {h} must map all {n_states} states to actions")
        probs = np.zeros((n_states, n_actions))
        probs[np.arange(n_states), pol] = 1.0
        return probs
    if pol.shape != (n_states, n_actions) or np.abs(pol.sum(axis=1) - 1).max() > 1e-9:
        raise InvalidInputError(f"policy for period {h} must give a distribution for all {n_states} states")
    return pol


def policy_values(mdp: BlockMDP, policy: Sequence) -> list:
    """V^pi_h for every period.

    ``policy[h]`` is either an integer array (one action per state) or an
    (S_h, A_h) array of action probabilities.
    """
    if len(policy) != mdp.horizon or any(p is None for p in policy):
        raise InvalidInputError(f"policy must define all {mdp.horizon} periods")
    values = [None] * mdp.horizon
    v_next = None
    for h in reversed(range(mdp.horizon)):
        S, A = mdp.rewards[h].shape
        probs = _policy_probs(policy[h], S, A, h)
        q = mdp.rewards[h].copy()
        if v_next is not None:
            q += mdp._expected_next(h, v_next)
        v_next = (probs * q).sum(axis=1)
        values[h] = v_next
    return values


def policy_block_value(mdp: BlockMDP, policy: Sequence) -> np.ndarray:
    return policy_values(mdp, policy)[0]


def greedy_policy(mdp: BlockMDP) -> list:
    """A deterministic optimal policy (lowest-index maximizer)."""
    values = optimal_values(mdp)
    out = []
    for h in range(mdp.horizon):
        q = mdp.rewards[h].copy()
        if h + 1 < mdp.horizon:
            q += mdp._expected_next(h, values[h + 1])
        out.append(q.argmax(axis=1))
    return out


def cumulative_regret(v_star, v_pi) -> np.ndarray:
    """Running sum of per-block gaps V*_0 - V^pi_0, in (episode, block) order."""
    v_star = np.asarray(v_star, dtype=float).reshape(-1)
    v_pi = np.asarray(v_pi, dtype=float).reshape(-1)
    if v_star.shape != v_pi.shape:
        raise InvalidInputError("oracle and policy values differ in length")
    if np.isnan(v_star).any() or np.isnan(v_pi).any():
        raise InvalidInputError("oracle values missing for some blocks")
    return np.cumsum(v_star - v_pi)


def theory_hyperparams(H: int, size_S: int, size_A: int, N: int) -> tuple[float, float]:
    """lambda = H^3 |S| log(2 H |S| |A| N) / 2 and sigma = 1 / sqrt(lambda); N is clamped to >= 1."""
    if H < 1 or size_S < 1 or size_A < 1:
        raise InvalidInputError("H, |S| and |A| must be positive")
    N = max(int(N), 1)
    lam = 0.5 * H ** 3 * size_S * np.log(2 * H * size_S * size_A * N)
    return float(lam), float(1.0 / np.sqrt(lam))
