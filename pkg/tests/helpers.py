"""Small environments and fixtures shared by the tests."""
from __future__ import annotations

import numpy as np

from dyadrl.features import TabularFeatures


class TinyEnv:
    """Tabular dyadic environment with random but block-stationary dynamics.

    High states are drawn iid each block; within a block the low state moves
    according to ``P[high, a_high, low, a_low]`` and rewards come from
    ``R[high, a_high, low, a_low]`` plus optional Gaussian noise.
    """

    tabular = True

    def __init__(self, rng, n_blocks=3, n_periods=3, n_high=2, n_low=3, seed=0, zero_reward=False,
                 noise=0.0, log=None):
        gen = np.random.default_rng(seed)
        self.rng = rng
        self.n_blocks, self.n_periods = n_blocks, n_periods
        self.n_high, self.n_low = n_high, n_low
        self.features = TabularFeatures(n_high, 2, n_low, 2)
        self.P = gen.dirichlet(np.ones(n_low), size=(n_high, 2, n_low, 2))
        self.R = np.zeros((n_high, 2, n_low, 2)) if zero_reward else gen.uniform(0, 1, (n_high, 2, n_low, 2))
        self.noise = noise
        self.log = log

    def start_episode(self):
        self.block = 0

    def start_block(self):
        self.block += 1
        self.high = int(self.rng.integers(self.n_high))
        self.low = 0
        self.a_high = None
        self.period = 0
        if self.log is not None:
            self.log.append(("start_block", self.block))
        return self.high

    def set_high_action(self, a):
        self.a_high = int(a)
        self.period = 1

    def low_state(self):
        return self.low

    def step(self, a):
        h, ah, s = self.high, self.a_high, self.low
        r = self.R[h, ah, s, a] + self.noise * self.rng.standard_normal()
        self.low = int(self.rng.choice(self.n_low, p=self.P[h, ah, s, a]))
        self.period += 1
        return float(r)


class ZeroRng:
    """Stand-in generator whose normal draws are all zero."""

    def standard_normal(self, size=None):
        return np.zeros(size) if size is not None else 0.0


def random_regression(rng, p=None, n=None):
    p = p or int(rng.integers(1, 11))
    n = int(rng.integers(0, 51)) if n is None else n
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    lam = float(rng.uniform(0.1, 5.0))
    sigma = float(rng.uniform(0.5, 2.0))
    return X, y, lam, sigma


def normal_equations(X, y, lam, sigma):
    """Independent ridge solution via numpy's generic solver."""
    p = X.shape[1]
    A = X.T @ X / sigma ** 2 + lam * np.eye(p)
    cov = np.linalg.solve(A, np.eye(p))
    mean = np.linalg.solve(A, X.T @ y / sigma ** 2)
    return mean, cov
