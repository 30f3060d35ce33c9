"""Rank-based covariance estimation for the unweighted effect estimator.

The asymptotic covariance of ``sqrt(N) * (p_hat - p)`` is ``V = E S E'`` where
``S`` is the ``d^2 x d^2`` covariance of the stacked pairwise effects and ``E``
averages each block of ``d``. Every entry of ``S`` is a signed sum of at most two
quantities ``tau_r(s, t)``, which are estimated from centered placements

    D_rk(s) = F_s(X_rk) - w_sr

computed from pairwise and within-group mid-ranks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .effects import stack_matrix
from .errors import (
    DegenerateError,
    DomainError,
    InsufficientReplicationError,
    InternalConsistencyError,
)
from .ranks import Dataset, RankTables, build_rank_tables

log = logging.getLogger(__name__)

__all__ = [
    "TauTable",
    "CovarianceEstimate",
    "TwoSampleVariance",
    "MATERIALIZE_MAX_D",
    "centered_placement",
    "placements",
    "tau_hat",
    "tau_table",
    "assemble_S",
    "covariance_estimate",
    "two_sample_variance",
    "f1_components",
]

MATERIALIZE_MAX_D = 16


@dataclass(frozen=True)
class TauTable:
    """``tau[r, s, t]`` for ``s != r`` and ``t != r``; undefined entries hold NaN."""

    tau: np.ndarray

    def __call__(self, r, s, t) -> float:
        return float(self.tau[r, s, t])

    def filled(self) -> np.ndarray:
        return np.nan_to_num(self.tau, nan=0.0)


@dataclass(frozen=True)
class CovarianceEstimate:
    V: np.ndarray
    N: int
    S: np.ndarray | None = None
    tau: TauTable | None = None


@dataclass(frozen=True)
class TwoSampleVariance:
    sigma2_1: float
    sigma2_2: float
    sigmaN2: float


def _require_replication(data: Dataset):
    small = [i + 1 for i, m in enumerate(data.n) if m < 2]
    if small:
        raise InsufficientReplicationError(
            f"groups {small} have fewer than 2 observations; variance estimation needs n_i >= 2",
            groups=small,
        )


def centered_placement(data: Dataset, r: int, s: int, tables: RankTables | None = None) -> np.ndarray:
    """``D_rk(s) = F_s(X_rk) - w_sr`` for all observations ``k`` of group ``r``."""
    if r == s:
        raise DomainError("centered placement needs two different groups")
    tables = tables or build_rank_tables(data)
    n = data.n
    pair = tables.pair(s, r)
    return ((pair - tables.within[r]) - (pair.mean() - (n[r] + 1) / 2)) / n[s]


def placements(data: Dataset, tables: RankTables | None = None) -> list[np.ndarray]:
    """For each group ``r`` a ``(d, n_r)`` array whose row ``s`` is ``D_r(s)`` (row ``r`` is zero)."""
    tables = tables or build_rank_tables(data)
    out = []
    for r in range(data.d):
        D = np.zeros((data.d, data.n[r]))
        for s in range(data.d):
            if s != r:
                D[s] = centered_placement(data, r, s, tables)
        out.append(D)
    return out


def tau_hat(data: Dataset, r: int, s: int, t: int, tables: RankTables | None = None) -> float:
    if s == r or t == r:
        raise DomainError("tau_r(s, t) needs s != r and t != r")
    nr = data.n[r]
    if nr < 2:
        raise InsufficientReplicationError(f"group {r + 1} has fewer than 2 observations", groups=[r + 1])
    tables = tables or build_rank_tables(data)
    Ds = centered_placement(data, r, s, tables)
    Dt = Ds if s == t else centered_placement(data, r, t, tables)
    return float(data.N / (nr * (nr - 1)) * np.dot(Ds, Dt))


def tau_table(data: Dataset, tables: RankTables | None = None, D: list | None = None) -> TauTable:
    _require_replication(data)
    D = D if D is not None else placements(data, tables)
    d, n, N = data.d, data.n, data.N
    tau = np.empty((d, d, d))
    for r in range(d):
        tau[r] = N / (n[r] * (n[r] - 1)) * (D[r] @ D[r].T)
        tau[r, r, :] = np.nan
        tau[r, :, r] = np.nan
    return TauTable(tau)


@lru_cache(maxsize=32)
def _assembly_plan(d: int):
    """Index arrays describing each nonzero entry of S as signed tau terms.

    Row index ``i*d + l`` addresses ``w_li``. Returns arrays
    ``(row, col, sign, r, s, t)``; ``S[row, col] += sign * tau[r, s, t]``.
    """
    terms = []
    for i in range(d):
        for ip in range(d):
            for l in range(d):
                for lp in range(d):
                    row, col = i * d + l, ip * d + lp
                    if i == ip:
                        if l == lp and l != i:
                            terms += [(row, col, 1, i, l, l), (row, col, 1, l, i, i)]
                        elif l != lp and l != i and lp != i:
                            terms.append((row, col, 1, i, l, lp))
                    elif l != lp:
                        if l != ip and lp == i:
                            terms.append((row, col, -1, i, l, ip))
                        elif l == ip and lp == i:
                            terms += [(row, col, -1, i, ip, ip), (row, col, -1, ip, i, i)]
                        elif l == ip and lp != i:
                            terms.append((row, col, -1, l, i, lp))
                    elif l != ip and l != i:
                        terms.append((row, col, 1, l, i, ip))
    arr = np.array(terms, dtype=np.int64)
    return tuple(arr[:, k].copy() for k in range(6))


def assemble_S(tau: TauTable) -> np.ndarray:
    """The ``d^2 x d^2`` matrix of pairwise-effect covariances from the case tables."""
    d = tau.tau.shape[0]
    row, col, sign, r, s, t = _assembly_plan(d)
    S = np.zeros((d * d, d * d))
    np.add.at(S, (row, col), sign * tau.tau[r, s, t])
    return S


def _blockwise_V(tau: TauTable) -> np.ndarray:
    # v_ij = 1' S_ij 1 / d^2 summed in closed form over the case tables.
    tz = tau.filled()
    d = tz.shape[0]
    V = -tz.sum(axis=1) - tz.sum(axis=2).T + tz.sum(axis=0)
    diag = tz.sum(axis=(1, 2)) + np.einsum("lii->i", tz)
    V[np.diag_indices(d)] = diag
    return V / d**2


def covariance_estimate(
    data: Dataset,
    tables: RankTables | None = None,
    materialize: bool | None = None,
) -> CovarianceEstimate:
    """Estimate ``V`` (and, for ``d <= 16``, the full ``S``) from the data.

    Parameters
    ----------
    materialize : bool, optional
        Build the full ``S`` matrix. Defaults to ``d <= MATERIALIZE_MAX_D``;
        otherwise ``V`` is accumulated block by block.
    """
    _require_replication(data)
    tables = tables or build_rank_tables(data)
    tau = tau_table(data, tables)
    d = data.d
    if materialize is None:
        materialize = d <= MATERIALIZE_MAX_D
    S = None
    if materialize:
        S = assemble_S(tau)
        E = stack_matrix(d)
        V = E @ S @ E.T
    else:
        V = _blockwise_V(tau)
    V = 0.5 * (V + V.T)
    diag = np.diag(V).copy()
    if np.any(diag < -1e-10):
        raise InternalConsistencyError(f"negative variance estimate {diag.min():.3g}")
    if np.any(diag < -1e-12):
        log.warning("clamping slightly negative variance estimates to 0 (min %.3g)", diag.min())
    if np.any(diag < 0):
        V[np.diag_indices(d)] = np.maximum(diag, 0.0)
    return CovarianceEstimate(V=V, N=data.N, S=S, tau=tau)


def two_sample_variance(data: Dataset, tables: RankTables | None = None) -> TwoSampleVariance:
    """Rank variance estimator of ``sqrt(N) * (w_12_hat - w_12)`` for two samples."""
    if data.d != 2:
        raise DomainError(f"two_sample_variance needs exactly 2 groups, got {data.d}")
    _require_replication(data)
    tables = tables or build_rank_tables(data)
    n = data.n
    N = data.N
    sig = []
    for j in range(2):
        pooled = tables.pooled[j]
        dev = pooled - tables.within[j] - pooled.mean() + (n[j] + 1) / 2
        sig.append(float(np.sum(dev**2) / ((N - n[j]) ** 2 * (n[j] - 1))))
    return TwoSampleVariance(sig[0], sig[1], float(N * (sig[0] / n[0] + sig[1] / n[1])))


def f1_components(data: Dataset, tables: RankTables | None = None) -> tuple[np.ndarray, float]:
    """Per-group rank dispersions ``S_i^2`` and the denominator degrees of freedom ``f1``."""
    _require_replication(data)
    tables = tables or build_rank_tables(data)
    n = data.n
    N = data.N
    S2 = np.array([
        np.sum((R - W - R.mean() + (m + 1) / 2) ** 2) / (m - 1)
        for R, W, m in zip(tables.pooled, tables.within, n)
    ])
    if not np.any(S2 > 0):
        raise DegenerateError("all rank dispersions are zero; f1 is undefined")
    a = S2 / (N - n)
    return S2, float(a.sum() ** 2 / np.sum(a**2 / (n - 1)))
