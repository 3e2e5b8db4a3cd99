"""Feature maps: mixed-radix one-hot codes and per-action linear blocks.

Agents see composite states (high state, high action, low state) and pick a
low action, so every map here is a function of those four parts.  One-hot
maps represent a feature vector by the index of its single nonzero entry;
linear maps use dense vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class SpaceSpec:
    cardinalities: tuple[int, ...]

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cardinalities)
        if not cards or any(c < 1 for c in cards):
            raise InvalidInputError(f"cardinalities must be positive, got {cards}")
        object.__setattr__(self, "cardinalities", cards)

    @property
    def dim(self) -> int:
        return int(np.prod(self.cardinalities))

    @property
    def strides(self) -> tuple[int, ...]:
        out, acc = [], 1
        for c in reversed(self.cardinalities):
            out.append(acc)
            acc *= c
        return tuple(reversed(out))


def one_hot_index(spec: SpaceSpec, indices: Sequence[int]) -> int:
    if len(indices) != len(spec.cardinalities):
        raise InvalidInputError(
            f"expected {len(spec.cardinalities)} indices, got {len(indices)}"
        )
    pos = 0
    for i, c, stride in zip(indices, spec.cardinalities, spec.strides):
        if not 0 <= i < c:
            raise InvalidInputError(f"index {i} out of range [0, {c})")
        pos += int(i) * stride
    return pos


def one_hot(spec: SpaceSpec, indices: Sequence[int]) -> np.ndarray:
    out = np.zeros(spec.dim)
    out[one_hot_index(spec, indices)] = 1.0
    return out


def decode_one_hot(spec: SpaceSpec, position: int) -> tuple[int, ...]:
    out = []
    for c, stride in zip(spec.cardinalities, spec.strides):
        out.append(position // stride % c)
    return tuple(out)


def linear_features(state: Sequence[float], action_levels: int, action: int) -> np.ndarray:
    """(1, state...) placed in the block of the chosen action, zeros elsewhere."""
    state = np.asarray(state, dtype=float).reshape(-1)
    if not np.all(np.isfinite(state)):
        raise InvalidInputError("state contains non-finite entries")
    if not 0 <= action < action_levels:
        raise InvalidInputError(f"action {action} out of range [0, {action_levels})")
    width = 1 + state.size
    out = np.zeros(action_levels * width)
    out[action * width] = 1.0
    out[action * width + 1:(action + 1) * width] = state
    return out


def feature_values(theta: np.ndarray, options) -> np.ndarray:
    """theta' phi for a batch of encoded feature vectors.

    ``options`` holds integer positions (one-hot) or rows of dense features;
    leading dimensions are preserved.
    """
    options = np.asarray(options)
    if options.dtype.kind in "iu":
        return theta[options]
    return options @ theta


class TabularFeatures:
    """One-hot encodings over (high state, high action, low state, low action).

    ``psi`` encodes (high state, high action) for the block-level bandit.
    """

    onehot = True

    def __init__(self, n_high: int, n_high_actions: int, n_low: int, n_low_actions: int):
        self.n_high_actions = n_high_actions
        self.n_low_actions = n_low_actions
        self.spec = SpaceSpec((n_high, n_high_actions, n_low, n_low_actions))
        self.high_spec = SpaceSpec((n_high, n_high_actions))
        self.dim = self.spec.dim
        self.high_dim = self.high_spec.dim
        self.joint_actions = list(product(range(n_high_actions), range(n_low_actions)))
        self._s = self.spec.strides
        self._hs = self.high_spec.strides

    def phi(self, sh, ah, sl, al) -> int:
        s = self._s
        return sh * s[0] + ah * s[1] + sl * s[2] + al

    def low_options(self, sh, ah, sl) -> np.ndarray:
        base = self.phi(sh, ah, sl, 0)
        return np.arange(base, base + self.n_low_actions)

    def joint_options(self, sh, sl) -> np.ndarray:
        return np.array([self.phi(sh, ah, sl, al) for ah, al in self.joint_actions])

    def psi(self, sh, ah) -> int:
        return sh * self._hs[0] + ah

    def high_options(self, sh) -> np.ndarray:
        base = self.psi(sh, 0)
        return np.arange(base, base + self.n_high_actions)


class LinearFeatures:
    """Intercept-plus-linear encodings with one block per low action.

    The low-level map uses (high state, high action flag, low state) as the
    regressors; ``psi`` uses the high state with one block per high action.
    """

    onehot = False

    def __init__(self, high_dim: int, low_dim: int, n_high_actions: int = 2, n_low_actions: int = 2):
        self.n_high_actions = n_high_actions
        self.n_low_actions = n_low_actions
        self.dim = n_low_actions * (2 + high_dim + low_dim)
        self.high_dim = n_high_actions * (1 + high_dim)
        self.joint_actions = list(product(range(n_high_actions), range(n_low_actions)))

    def _state(self, sh, ah, sl) -> np.ndarray:
        state = np.concatenate([np.asarray(sh, float).reshape(-1), [float(ah)],
                                np.asarray(sl, float).reshape(-1)])
        if not np.all(np.isfinite(state)):
            raise InvalidInputError("state contains non-finite entries")
        return state

    @staticmethod
    def _all_actions(state: np.ndarray, levels: int) -> np.ndarray:
        # row a equals linear_features(state, levels, a)
        width = 1 + state.size
        out = np.zeros((levels, levels * width))
        for a in range(levels):
            out[a, a * width] = 1.0
            out[a, a * width + 1:(a + 1) * width] = state
        return out

    def phi(self, sh, ah, sl, al) -> np.ndarray:
        return linear_features(self._state(sh, ah, sl), self.n_low_actions, al)

    def low_options(self, sh, ah, sl) -> np.ndarray:
        return self._all_actions(self._state(sh, ah, sl), self.n_low_actions)

    def joint_options(self, sh, sl) -> np.ndarray:
        rows = [self._all_actions(self._state(sh, ah, sl), self.n_low_actions)
                for ah in range(self.n_high_actions)]
        return np.concatenate(rows)

    def psi(self, sh, ah) -> np.ndarray:
        return linear_features(sh, self.n_high_actions, ah)

    def high_options(self, sh) -> np.ndarray:
        sh = np.asarray(sh, float).reshape(-1)
        if not np.all(np.isfinite(sh)):
            raise InvalidInputError("state contains non-finite entries")
        return self._all_actions(sh, self.n_high_actions)
