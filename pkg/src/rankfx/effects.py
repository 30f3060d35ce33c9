"""Relative effects: pairwise, unweighted, weighted, and the two-way additive decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutError
from .ranks import Dataset, RankTables, as_sample, build_rank_tables, midranks

__all__ = [
    "EffectEstimates",
    "AdditiveDecomposition",
    "pairwise_effect",
    "pairwise_effects",
    "unweighted_effects",
    "weighted_effects",
    "stack_matrix",
    "additive_decomposition",
    "normalized_ecdf",
    "empirical_effect_function",
]


@dataclass(frozen=True)
class EffectEstimates:
    """Estimated unweighted relative effects.

    Attributes
    ----------
    p : ndarray, shape (d,)
        Unweighted effects ``p_i = (1/d) sum_l w_li``.
    w : ndarray, shape (d, d)
        Pairwise effects, ``w[l, i]`` estimates ``P(X_l < X_i) + 0.5 P(X_l = X_i)``.
    n : ndarray
        Group sizes.
    r : ndarray or None
        Weighted (pooled-rank) effects; descriptive only.
    """

    p: np.ndarray
    w: np.ndarray
    n: np.ndarray
    r: np.ndarray | None = None

    @property
    def N(self) -> int:
        return int(self.n.sum())

    @property
    def d(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class AdditiveDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


def pairwise_effect(sample_l, sample_i) -> float:
    """Estimate ``w_li = P(X_l < X_i) + 0.5 P(X_l = X_i)`` from pooled mid-ranks."""
    xl = as_sample(sample_l, "sample_l")
    xi = as_sample(sample_i, "sample_i")
    r = midranks(np.concatenate([xl, xi]))[xl.size:]
    return float((r.mean() - (xi.size + 1) / 2) / xl.size)


def pairwise_effects(data: Dataset, tables: RankTables | None = None) -> np.ndarray:
    """Matrix of all pairwise effects with ``w[l, i] + w[i, l] == 1`` and a diagonal of 1/2."""
    tables = tables or build_rank_tables(data)
    n = data.n
    d = data.d
    w = np.full((d, d), 0.5)
    for i in range(d):
        for l in range(i + 1, d):
            w[l, i] = (tables.pair(l, i).mean() - (n[i] + 1) / 2) / n[l]
            w[i, l] = 1.0 - w[l, i]
    return w


def stack_matrix(d: int) -> np.ndarray:
    """The averaging matrix ``I_d kron (1/d) 1_d'`` mapping the stacked pairwise effects to p."""
    return np.kron(np.eye(d), np.full((1, d), 1.0 / d))


def weighted_effects(data: Dataset, tables: RankTables | None = None) -> np.ndarray:
    tables = tables or build_rank_tables(data)
    return np.array([(r.mean() - 0.5) / data.N for r in tables.pooled])


def unweighted_effects(data: Dataset, tables: RankTables | None = None) -> EffectEstimates:
    tables = tables or build_rank_tables(data)
    w = pairwise_effects(data, tables)
    return EffectEstimates(p=w.mean(axis=0), w=w, n=data.n, r=weighted_effects(data, tables))


def additive_decomposition(effects, a: int, b: int) -> AdditiveDecomposition:
    """Split cell effects of an ``a x b`` layout into row, column and interaction parts.

    ``p[i, j] = 1/2 + alpha[i] + beta[j] + gamma[i, j]`` with all parts summing
    to zero over each index.
    """
    p = np.asarray(getattr(effects, "p", effects), dtype=float)
    if p.size != a * b:
        raise LayoutError(f"{p.size} effects cannot form a {a}x{b} layout")
    P = p.reshape(a, b)
    row = P.mean(axis=1)
    col = P.mean(axis=0)
    return AdditiveDecomposition(
        alpha=row - 0.5,
        beta=col - 0.5,
        gamma=P - row[:, None] - col[None, :] + 0.5,
    )


def normalized_ecdf(sample, x) -> np.ndarray:
    """Normalized empirical CDF: counts ties with weight 1/2."""
    s = np.sort(np.asarray(sample, dtype=float))
    x = np.asarray(x, dtype=float)
    below = np.searchsorted(s, x, side="left")
    upto = np.searchsorted(s, x, side="right")
    return 0.5 * (below + upto) / s.size


def empirical_effect_function(data: Dataset, coeffs, grid) -> list[tuple[float, float]]:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size != data.d:
        raise LayoutError(f"expected {data.d} coefficients, got {coeffs.size}")
    grid = np.asarray(grid, dtype=float)
    values = np.zeros(grid.shape)
    for c, g in zip(coeffs, data.groups):
        if c != 0.0:
            values += c * normalized_ecdf(g, grid)
    return list(zip(grid.tolist(), values.tolist()))
