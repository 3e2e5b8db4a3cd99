"""Regression designs that keep sufficient statistics between fits.

Each design stores the rows added so far and, for bootstrapped targets, the
encoded features of every action available at the successor state.  X'X and
X'r are accumulated as rows arrive; the bootstrap part of X'y depends on the
current next-period weights and is recomputed from all rows at every fit,
so a fit always uses the full data set.

One-hot designs keep X'X diagonal (visit counts), which makes each fit
O(rows + dim).  Draws consume ``rng.standard_normal(dim)`` exactly once,
like :func:`dyadrl.bayes.sample_weights`.
"""
from __future__ import annotations

import numpy as np

from ..bayes import Posterior, diagonal_posterior, posterior_from_stats, sample_diagonal, sample_weights


class _Grow:
    """Append-only array with amortised O(1) appends."""

    def __init__(self, shape=(), dtype=float, capacity=64):
        self._data = np.zeros((capacity,) + tuple(shape), dtype=dtype)
        self.n = 0

    def append(self, value):
        if self.n == self._data.shape[0]:
            grown = np.zeros((2 * self.n,) + self._data.shape[1:], dtype=self._data.dtype)
            grown[: self.n] = self._data
            self._data = grown
        self._data[self.n] = value
        self.n += 1

    @property
    def view(self) -> np.ndarray:
        return self._data[: self.n]


def _pad(options: np.ndarray, width: int) -> np.ndarray:
    # repeating an option leaves the max over options unchanged
    options = np.asarray(options)
    if options.shape[0] == width:
        return options
    reps = np.concatenate([options, np.repeat(options[:1], width - options.shape[0], axis=0)])
    return reps


class IndexDesign:
    """One-hot design: rows are feature positions.

    Bootstrapped rows are stored as counts of distinct (position, next
    option set) pairs, so a fit costs O(distinct pairs + dim) however many
    rows have been added.
    """

    def __init__(self, dim: int, next_width: int = 2):
        self.dim = dim
        self.width = next_width
        self.counts = np.zeros(dim)
        self.rsum = np.zeros(dim)
        self.n_rows = 0
        self._sets: dict = {}
        self._table = _Grow((next_width,), np.int64)
        self._pairs: dict = {}
        self._pos = _Grow((), np.int64)
        self._sid = _Grow((), np.int64)
        self._mult = _Grow((), float)

    def _set_id(self, options) -> int:
        key = tuple(int(o) for o in options)
        sid = self._sets.get(key)
        if sid is None:
            sid = self._sets[key] = len(self._sets)
            self._table.append(_pad(np.asarray(key), self.width))
        return sid

    def add(self, x: int, reward: float, next_options=None) -> None:
        self.counts[x] += 1.0
        self.rsum[x] += reward
        self.n_rows += 1
        if next_options is not None:
            key = (int(x), self._set_id(next_options))
            slot = self._pairs.get(key)
            if slot is None:
                self._pairs[key] = self._pos.n
                self._pos.append(key[0])
                self._sid.append(key[1])
                self._mult.append(1.0)
            else:
                self._mult.view[slot] += 1.0

    def xty(self, theta_next=None, gamma: float = 1.0) -> np.ndarray:
        if theta_next is None or self._pos.n == 0:
            return self.rsum.copy()
        best = np.asarray(theta_next)[self._table.view].max(axis=1)
        boot = self._mult.view * best[self._sid.view]
        return self.rsum + gamma * np.bincount(self._pos.view, weights=boot, minlength=self.dim)

    def posterior(self, lam, sigma, theta_next=None, gamma: float = 1.0) -> Posterior:
        mean, var = diagonal_posterior(self.counts, self.xty(theta_next, gamma), lam, sigma)
        return Posterior(mean, np.diag(var))

    def fit(self, lam, sigma, rng, theta_next=None, gamma: float = 1.0) -> np.ndarray:
        mean, var = diagonal_posterior(self.counts, self.xty(theta_next, gamma), lam, sigma)
        return sample_diagonal(mean, var, rng)


class DenseDesign:
    """Dense-feature design with an incrementally accumulated Gram matrix."""

    def __init__(self, dim: int, next_width: int = 2):
        self.dim = dim
        self.width = next_width
        self.gram = np.zeros((dim, dim))
        self.xr = np.zeros(dim)
        self._x_nt = _Grow((dim,))
        # next options stacked row-wise: rows width*i .. width*i+width-1 belong to row i
        self._next = _Grow((dim,))
        self.n_rows = 0

    def add(self, x, reward: float, next_options=None) -> None:
        x = np.asarray(x, dtype=float)
        self.gram += np.outer(x, x)
        self.xr += reward * x
        self.n_rows += 1
        if next_options is not None:
            self._x_nt.append(x)
            for row in _pad(next_options, self.width):
                self._next.append(row)

    def xty(self, theta_next=None, gamma: float = 1.0) -> np.ndarray:
        if theta_next is None or self._x_nt.n == 0:
            return self.xr.copy()
        boot = (self._next.view @ theta_next).reshape(-1, self.width).max(axis=1)
        return self.xr + self._x_nt.view.T @ (gamma * boot)

    def posterior(self, lam, sigma, theta_next=None, gamma: float = 1.0) -> Posterior:
        return posterior_from_stats(self.gram, self.xty(theta_next, gamma), lam, sigma)

    def fit(self, lam, sigma, rng, theta_next=None, gamma: float = 1.0) -> np.ndarray:
        return sample_weights(self.posterior(lam, sigma, theta_next, gamma), rng)


class RelabeledDesign:
    """Block-level bandit data whose targets are recomputed from theta_1.

    Each record keeps psi(s_high, a_high) and the encoded phi_1 features of
    every low action at the block's first low state.
    """

    def __init__(self, dim: int, onehot: bool):
        self.dim = dim
        self.onehot = onehot
        self._psi = _Grow((), np.int64) if onehot else _Grow((dim,))
        self._first: _Grow | None = None
        self.r_tilde = np.zeros(0)
        self.gram = np.zeros(dim) if onehot else np.zeros((dim, dim))

    def __len__(self):
        return self._psi.n

    def add(self, psi, first_options) -> None:
        first_options = np.asarray(first_options)
        if self._first is None:
            self._first = _Grow(first_options.shape, first_options.dtype)
        self._psi.append(psi)
        self._first.append(first_options)
        if self.onehot:
            self.gram[psi] += 1.0
        else:
            psi = np.asarray(psi, dtype=float)
            self.gram += np.outer(psi, psi)

    def relabel(self, theta_1) -> np.ndarray:
        if self._first is None:
            self.r_tilde = np.zeros(0)
        elif self.onehot:
            self.r_tilde = theta_1[self._first.view].max(axis=1)
        else:
            self.r_tilde = (self._first.view @ theta_1).max(axis=1)
        return self.r_tilde

    def xty(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(self.dim)
        if self.onehot:
            return np.bincount(self._psi.view, weights=self.r_tilde, minlength=self.dim)
        return self._psi.view.T @ self.r_tilde

    def fit(self, lam, sigma, rng) -> np.ndarray:
        if self.onehot:
            mean, var = diagonal_posterior(self.gram, self.xty(), lam, sigma)
            return sample_diagonal(mean, var, rng)
        return sample_weights(posterior_from_stats(self.gram, self.xty(), lam, sigma), rng)
