"""Gaussian linear regression posteriors with an N(0, I/lambda) prior."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidInputError, NumericError

JITTER = 1e-10


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise InvalidInputError(
                f"mean of length {mean.size} does not match covariance of shape {cov.shape}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class RegressionData:
    rows: np.ndarray
    targets: np.ndarray

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], targets: Sequence[float], dim: int | None = None):
        targets = np.asarray(targets, dtype=float).reshape(-1)
        if len(rows) == 0:
            if dim is None:
                raise InvalidInputError("empty data needs an explicit feature dimension")
            X = np.zeros((0, dim))
        else:
            try:
                X = np.array(rows, dtype=float)
            except ValueError as exc:
                raise InvalidInputError("rows have unequal lengths") from exc
            if X.ndim != 2:
                raise InvalidInputError("rows have unequal lengths")
            if dim is not None and X.shape[1] != dim:
                raise InvalidInputError(f"rows have dimension {X.shape[1]}, expected {dim}")
        return cls(X, targets)

    def __post_init__(self):
        X = np.asarray(self.rows, dtype=float)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise InvalidInputError("rows must form a 2-d array")
        if X.shape[0] != y.size:
            raise InvalidInputError(f"{X.shape[0]} rows but {y.size} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidInputError("regression data contains non-finite entries")
        object.__setattr__(self, "rows", X)
        object.__setattr__(self, "targets", y)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


def _check_hyper(lam: float, sigma: float) -> None:
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidInputError(f"lambda must be positive, got {lam}")
    if not (np.isfinite(sigma) and sigma > 0):
        raise InvalidInputError(f"sigma must be positive, got {sigma}")


def posterior(data: RegressionData, lam: float = 1.0, sigma: float = 1.0) -> Posterior:
    """Posterior of the weights under y ~ N(Xw, sigma^2) and w ~ N(0, I/lam).

    covariance = (X'X / sigma^2 + lam I)^-1, mean = covariance X'y / sigma^2.
    """
    _check_hyper(lam, sigma)
    X, y = data.rows, data.targets
    return posterior_from_stats(X.T @ X, X.T @ y, lam, sigma)


def posterior_from_stats(gram: np.ndarray, xty: np.ndarray, lam: float, sigma: float) -> Posterior:
    """Same posterior as :func:`posterior`, from the sufficient statistics X'X and X'y."""
    _check_hyper(lam, sigma)
    s2 = sigma * sigma
    precision = np.asarray(gram, dtype=float) / s2
    precision.flat[:: precision.shape[0] + 1] += lam
    cov = _inverse_from_cholesky(_cholesky(precision))
    return Posterior(cov @ xty / s2, cov)


def diagonal_posterior(counts: np.ndarray, xty: np.ndarray, lam: float, sigma: float):
    """Mean and variance vectors when X'X is diagonal (one-hot designs)."""
    _check_hyper(lam, sigma)
    s2 = sigma * sigma
    var = 1.0 / (counts / s2 + lam)
    return var * xty / s2, var


def _inverse_from_cholesky(L: np.ndarray) -> np.ndarray:
    inv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NumericError(f"inverse from Cholesky factor failed (LAPACK info {info})")
    # dpotri fills the lower triangle; the upper one is still zero from the factor
    diag = inv.diagonal().copy()
    full = inv + inv.T
    full.flat[:: full.shape[0] + 1] = diag
    return full


def _cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, retrying once with 1e-10 added to the diagonal."""
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise NumericError("matrix has non-finite entries")
    L, info = lapack.dpotrf(matrix, lower=1, clean=1)
    if info == 0:
        return L
    L, info = lapack.dpotrf(matrix + JITTER * np.eye(matrix.shape[0]), lower=1, clean=1)
    if info == 0:
        return L
    eig = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    raise NumericError(
        f"matrix is not positive definite: min eigenvalue {eig.min():.3e}, "
        f"max eigenvalue {eig.max():.3e}, condition number "
        f"{np.linalg.cond(matrix):.3e}"
    )


def sample_weights(post: Posterior, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(mean, covariance) via a Cholesky factor of the covariance."""
    L = _cholesky(post.covariance)
    z = rng.standard_normal(post.dim)
    return post.mean + L @ z


def sample_diagonal(mean: np.ndarray, var: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw matching :func:`sample_weights` for a diagonal covariance."""
    return mean + np.sqrt(var) * rng.standard_normal(mean.size)
