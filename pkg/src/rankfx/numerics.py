"""Numerical substrate: symmetric eigenvalues, distribution functions and seeded RNG streams.

The linear algebra is backed by LAPACK through numpy and the distribution
functions by scipy.special; this module pins down the argument checks and the
conventions the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError

__all__ = [
    "symmetric_eigenvalues",
    "chi2_cdf",
    "chi2_sf",
    "chi2_quantile",
    "f_cdf",
    "f_sf",
    "f_quantile",
    "normal_cdf",
    "normal_quantile",
    "RngStream",
    "standard_normal",
    "double_exponential",
    "lognormal",
    "uniform",
]


def symmetric_eigenvalues(M) -> np.ndarray:
    """Eigenvalues of a symmetric matrix in descending order.

    Raises DomainError when ``M`` is not symmetric to within
    ``1e-10 * ||M||_inf``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {M.shape}")
    scale = np.abs(M).sum(axis=1).max() if M.size else 0.0
    if np.abs(M - M.T).max(initial=0.0) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise DomainError("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (M + M.T))[::-1]


def _check_df(*dfs):
    for df in dfs:
        if not np.all(np.asarray(df) > 0) or not np.all(np.isfinite(df)):
            raise DomainError(f"degrees of freedom must be positive and finite, got {df}")


def _check_prob(q):
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)) or np.any(np.isnan(q)):
        raise DomainError(f"probability must lie in (0, 1), got {q}")


def chi2_cdf(x, df):
    _check_df(df)
    return stats.chi2.cdf(x, df)


def chi2_sf(x, df):
    _check_df(df)
    return stats.chi2.sf(x, df)


def chi2_quantile(q, df):
    _check_df(df)
    _check_prob(q)
    return stats.chi2.ppf(q, df)


def f_cdf(x, df1, df2):
    _check_df(df1, df2)
    return stats.f.cdf(x, df1, df2)


def f_sf(x, df1, df2):
    _check_df(df1, df2)
    return stats.f.sf(x, df1, df2)


def f_quantile(q, df1, df2):
    _check_df(df1, df2)
    _check_prob(q)
    return stats.f.ppf(q, df1, df2)


def normal_cdf(x):
    return stats.norm.cdf(x)


def normal_quantile(q):
    _check_prob(q)
    return stats.norm.ppf(q)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``seed`` and a substream path.

    Substreams are pure functions of ``(seed, key)``, so replication ``r`` of a
    simulation can be generated on any worker in any order::

        RngStream(42).child(r)          # data for replication r
        RngStream(42).child(r, 1)       # inner Monte-Carlo draws of replication r
    """

    seed: int
    key: tuple[int, ...] = ()

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(k) for k in key))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def standard_normal(rng: np.random.Generator, size):
    return rng.standard_normal(size)


def double_exponential(rng: np.random.Generator, size):
    # Laplace(0, b) has variance 2 b^2; b = 1/sqrt(2) gives unit variance.
    return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size)


def lognormal(rng: np.random.Generator, sigma, size):
    return np.exp(sigma * rng.standard_normal(size))


def uniform(rng: np.random.Generator, size):
    return rng.random(size)
