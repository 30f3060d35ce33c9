"""Test statistics, their small-sample approximations and confidence intervals.

Five tests are available for a hypothesis ``C p = 0`` with projection ``T``:

``ats-f``
    ANOVA-type statistic against ``F(f, f1)``; the recommended default.
``ats-box``
    ``f * Q_N`` against ``chi2(f)``.
``ats-eigen``
    ``Q_N`` against a Monte-Carlo approximation of its weighted chi-square limit.
``wald``
    Wald-type statistic against ``chi2(rank(C V C'))``. Known to be liberal
    in small samples because the rank of the estimated middle matrix need
    not match its limit.
``kruskal-wallis``
    Classical tie-corrected Kruskal-Wallis test of equal distributions across
    all cells; a baseline, not a test of ``C p = 0``.
"""

from __future__ import annotations

import math
import platform
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy

from . import __version__
from .contrasts import HypothesisSpec, matrix_rank, moore_penrose, one_way_hypothesis, two_way_hypotheses
from .covariance import CovarianceEstimate, covariance_estimate, f1_components
from .effects import AdditiveDecomposition, EffectEstimates, additive_decomposition, unweighted_effects
from .errors import DegenerateError, DomainError, InternalConsistencyError, LayoutError, RankFXError
from .numerics import (
    RngStream,
    chi2_quantile,
    chi2_sf,
    f_quantile,
    f_sf,
    normal_quantile,
    symmetric_eigenvalues,
)
from .ranks import Dataset, RankTables, build_rank_tables

__all__ = [
    "METHODS",
    "TestResult",
    "ConfidenceInterval",
    "AnalysisReport",
    "anova_type_statistic",
    "box_df",
    "wald_type_statistic",
    "ats_eigen_test",
    "ats_box_test",
    "ats_f_test",
    "kruskal_wallis",
    "confidence_intervals",
    "resolve_hypotheses",
    "analyze",
]

METHODS = ("ats-f", "ats-box", "ats-eigen", "wald", "kruskal-wallis")
DEFAULT_MC_RUNS = 10_000
_TRACE_TOL = 1e-12
_EIGEN_NEG_TOL = 1e-10


@dataclass
class TestResult:
    method: str
    statistic: float
    df: tuple
    p_value: float
    critical_value: float
    alpha: float
    hypothesis: str = ""
    mc_runs: int | None = None
    seed: int | None = None

    __test__ = False  # keep pytest from collecting this class

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value

    def to_dict(self) -> dict:
        out = asdict(self)
        out["df"] = list(self.df)
        return out


@dataclass
class ConfidenceInterval:
    index: int
    estimate: float
    lower: float
    upper: float
    level: float
    transform: str
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _traces(V, H: HypothesisSpec):
    TV = H.T @ V
    return TV, float(np.trace(TV))


def anova_type_statistic(effects: EffectEstimates, cov: CovarianceEstimate, H: HypothesisSpec) -> float:
    """``Q_N = N p' T p / tr(T V)``."""
    _, tr = _traces(cov.V, H)
    if tr <= _TRACE_TOL:
        raise DegenerateError(f"tr(TV) = {tr:.3g}: the projected effect estimator has no variance")
    p = effects.p
    return float(cov.N * (p @ H.T @ p) / tr)


def box_df(cov: CovarianceEstimate, H: HypothesisSpec) -> float:
    """Numerator degrees of freedom ``f = tr(TV)^2 / tr(TVTV)``."""
    TV, tr = _traces(cov.V, H)
    tr2 = float(np.trace(TV @ TV))
    if tr <= _TRACE_TOL or tr2 <= _TRACE_TOL**2:
        raise DegenerateError("tr(TV) vanishes; Box degrees of freedom undefined")
    return tr**2 / tr2


def wald_type_statistic(
    effects: EffectEstimates, cov: CovarianceEstimate, H: HypothesisSpec, alpha: float = 0.05
) -> TestResult:
    C = H.C
    M = C @ cov.V @ C.T
    M = 0.5 * (M + M.T)
    rank = matrix_rank(M)
    if rank == 0:
        raise DegenerateError("C V C' has rank 0; Wald-type statistic undefined")
    Cp = C @ effects.p
    W = float(max(cov.N * Cp @ moore_penrose(M) @ Cp, 0.0))
    return TestResult(
        method="wald",
        statistic=W,
        df=(rank,),
        p_value=float(chi2_sf(W, rank)),
        critical_value=float(chi2_quantile(1 - alpha, rank)),
        alpha=alpha,
        hypothesis=H.label,
    )


def _eigen_weights(cov: CovarianceEstimate, H: HypothesisSpec) -> np.ndarray:
    lam = symmetric_eigenvalues(H.T @ cov.V @ H.T)
    if lam.min(initial=0.0) < -_EIGEN_NEG_TOL:
        raise InternalConsistencyError(f"T V T has a negative eigenvalue {lam.min():.3g}")
    # same cutoff as the SVD rank rule: tiny positive roundoff counts as zero
    lam[lam <= lam.size * np.finfo(float).eps * max(lam[0], 0.0)] = 0.0
    if not np.any(lam > 0):
        raise DegenerateError("all eigenvalues of T V vanish")
    _, tr = _traces(cov.V, H)
    return lam[lam > 0] / tr


def ats_eigen_test(
    effects: EffectEstimates,
    cov: CovarianceEstimate,
    H: HypothesisSpec,
    alpha: float = 0.05,
    mc_runs: int = DEFAULT_MC_RUNS,
    seed: int = 0,
    rng: np.random.Generator | None = None,
    statistic: float | None = None,
) -> TestResult:
    """Compare ``Q_N`` with Monte-Carlo draws of ``sum_i (lambda_i / tr) C_i^2``.

    The eigenvalues come from the symmetric matrix ``T V T``, which shares its
    nonzero spectrum with ``T V``. The critical value is the
    ``ceil((1 - alpha) * mc_runs)``-th order statistic of the draws and the
    p-value is ``(#{draws >= Q_N} + 1) / (mc_runs + 1)``.
    """
    if mc_runs < 1000:
        raise DomainError(f"mc_runs must be at least 1000, got {mc_runs}")
    Q = anova_type_statistic(effects, cov, H) if statistic is None else statistic
    weights = _eigen_weights(cov, H)
    if rng is None:
        rng = RngStream(seed).generator()
    draws = np.square(rng.standard_normal((mc_runs, weights.size))) @ weights
    draws.sort()
    k = math.ceil((1 - alpha) * mc_runs)
    crit = float(draws[min(max(k, 1), mc_runs) - 1])
    exceed = mc_runs - np.searchsorted(draws, Q, side="left")
    return TestResult(
        method="ats-eigen",
        statistic=Q,
        df=tuple(float(w) for w in weights),
        p_value=float((exceed + 1) / (mc_runs + 1)),
        critical_value=crit,
        alpha=alpha,
        hypothesis=H.label,
        mc_runs=mc_runs,
        seed=seed,
    )


def ats_box_test(
    effects: EffectEstimates, cov: CovarianceEstimate, H: HypothesisSpec, alpha: float = 0.05
) -> TestResult:
    Q = anova_type_statistic(effects, cov, H)
    f = box_df(cov, H)
    return TestResult(
        method="ats-box",
        statistic=Q,
        df=(f,),
        p_value=float(chi2_sf(f * Q, f)),
        critical_value=float(chi2_quantile(1 - alpha, f) / f),
        alpha=alpha,
        hypothesis=H.label,
    )


def ats_f_test(
    effects: EffectEstimates, cov: CovarianceEstimate, H: HypothesisSpec, f1: float, alpha: float = 0.05
) -> TestResult:
    Q = anova_type_statistic(effects, cov, H)
    f = box_df(cov, H)
    return TestResult(
        method="ats-f",
        statistic=Q,
        df=(f, float(f1)),
        p_value=float(f_sf(Q, f, f1)),
        critical_value=float(f_quantile(1 - alpha, f, f1)),
        alpha=alpha,
        hypothesis=H.label,
    )


def kruskal_wallis(data: Dataset, alpha: float = 0.05, tables: RankTables | None = None) -> TestResult:
    """Tie-corrected Kruskal-Wallis H test across all groups."""
    d, N, n = data.d, data.N, data.n
    if N < d + 1:
        raise DomainError(f"Kruskal-Wallis needs N >= d + 1 observations, got N={N}, d={d}")
    tables = tables or build_rank_tables(data)
    rbar = np.array([r.mean() for r in tables.pooled])
    H = 12.0 / (N * (N + 1)) * np.sum(n * (rbar - (N + 1) / 2) ** 2)
    _, counts = np.unique(data.pooled(), return_counts=True)
    correction = 1.0 - np.sum(counts**3 - counts) / (N**3 - N)
    if correction <= 0:
        raise DegenerateError("all observations are tied")
    H = float(H / correction)
    return TestResult(
        method="kruskal-wallis",
        statistic=H,
        df=(d - 1,),
        p_value=float(chi2_sf(H, d - 1)),
        critical_value=float(chi2_quantile(1 - alpha, d - 1)),
        alpha=alpha,
        hypothesis="all-cells",
    )


def confidence_intervals(
    effects: EffectEstimates,
    cov: CovarianceEstimate,
    alpha: float = 0.05,
    transform: str = "logit",
    labels=None,
) -> list[ConfidenceInterval]:
    """Delta-method intervals for each ``p_i``, optionally on the logit scale.

    Identity-scale limits are clipped to [0, 1].
    """
    if transform not in ("logit", "identity"):
        raise DomainError(f"unknown transform {transform!r}")
    z = float(normal_quantile(1 - alpha / 2))
    se = np.sqrt(np.clip(np.diag(cov.V), 0.0, None) / cov.N)
    out = []
    for i, p in enumerate(effects.p):
        if transform == "logit":
            if not 0.0 < p < 1.0:
                raise DomainError(f"effect {i + 1} equals {p}; logit interval undefined")
            g = math.log(p / (1 - p))
            half = z * se[i] / (p * (1 - p))
            lo, hi = _expit(g - half), _expit(g + half)
        else:
            lo, hi = max(p - z * se[i], 0.0), min(p + z * se[i], 1.0)
        label = labels[i] if labels is not None else f"group{i + 1}"
        out.append(ConfidenceInterval(i, float(p), float(lo), float(hi), 1 - alpha, transform, label))
    return out


def _expit(x):
    return 1.0 / (1.0 + math.exp(-x))


def resolve_hypotheses(data: Dataset, hypotheses=None) -> list[HypothesisSpec]:
    """Turn names (``oneway``, ``A``, ``B``, ``AB``) or specs into HypothesisSpec objects.

    Two-way hypotheses are labelled by the factor names when the data carry them.
    """
    two_way = data.shape is not None and len(data.shape) == 2
    if hypotheses is None:
        hypotheses = ["A", "B", "AB"] if two_way else ["oneway"]
    out = []
    for h in hypotheses:
        if isinstance(h, HypothesisSpec):
            if h.d != data.d:
                raise LayoutError(f"hypothesis {h.label!r} has {h.d} columns, data has {data.d} groups")
            out.append(h)
        elif h == "oneway":
            out.append(one_way_hypothesis(data.d))
        elif h in ("A", "B", "AB"):
            if not two_way:
                raise LayoutError(f"hypothesis {h!r} needs a two-way layout")
            spec = dict(zip(("A", "B", "AB"), two_way_hypotheses(*data.shape)))[h]
            if data.factors is not None and len(data.factors) == 2:
                fa, fb = data.factors
                spec = replace(spec, label={"A": fa, "B": fb, "AB": f"{fa}:{fb}"}[h])
            out.append(spec)
        else:
            raise LayoutError(f"unknown hypothesis {h!r}")
    return out


@dataclass
class AnalysisReport:
    cells: list
    n: list
    effects: EffectEstimates
    cov: CovarianceEstimate
    f1: float | None
    S2: list
    tests: list
    cis: list
    decomposition: AdditiveDecomposition | None
    factors: list | None = None
    metadata: dict = field(default_factory=dict)

    def test(self, method: str, hypothesis: str) -> TestResult:
        for t in self.tests:
            if t.method == method and t.hypothesis == hypothesis:
                return t
        raise KeyError((method, hypothesis))

    def to_dict(self) -> dict:
        out = {
            "cells": list(self.cells),
            "factors": self.factors,
            "n": [int(m) for m in self.n],
            "N": int(sum(self.n)),
            "effects": [float(v) for v in self.effects.p],
            "weighted_effects": [float(v) for v in self.effects.r],
            "pairwise_effects": self.effects.w.tolist(),
            "covariance": self.cov.V.tolist(),
            "f1": self.f1,
            "rank_dispersions": [float(v) for v in self.S2],
            "tests": [t.to_dict() for t in self.tests],
            "cis": [c.to_dict() for c in self.cis],
            "metadata": dict(self.metadata),
        }
        if self.decomposition is not None:
            out["decomposition"] = {
                "alpha": self.decomposition.alpha.tolist(),
                "beta": self.decomposition.beta.tolist(),
                "gamma": self.decomposition.gamma.tolist(),
            }
        return out


def analyze(
    data: Dataset,
    hypotheses=None,
    methods=("ats-f", "ats-box", "ats-eigen", "wald", "kruskal-wallis"),
    alpha: float = 0.05,
    transform: str = "logit",
    mc_runs: int = DEFAULT_MC_RUNS,
    seed: int = 0,
) -> AnalysisReport:
    """Run the full pipeline: effects, covariance, the requested tests and intervals.

    Errors raised by the building blocks are re-raised with the failing
    hypothesis or method named in the message.
    """
    if not 0 < alpha <= 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5], got {alpha}")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise DomainError(f"unknown methods {sorted(unknown)}")
    tables = build_rank_tables(data)
    effects = unweighted_effects(data, tables)
    cov = covariance_estimate(data, tables)
    try:
        S2, f1 = f1_components(data, tables)
        f1_error = None
    except DegenerateError as exc:
        S2, f1, f1_error = np.zeros(data.d), None, exc
    specs = resolve_hypotheses(data, hypotheses)

    tests = []
    for h_index, H in enumerate(specs):
        for method in methods:
            if method == "kruskal-wallis":
                continue
            try:
                if method == "ats-f":
                    if f1_error is not None:
                        raise f1_error
                    tests.append(ats_f_test(effects, cov, H, f1, alpha))
                elif method == "ats-box":
                    tests.append(ats_box_test(effects, cov, H, alpha))
                elif method == "ats-eigen":
                    rng = RngStream(seed).child(h_index).generator()
                    tests.append(ats_eigen_test(effects, cov, H, alpha, mc_runs, seed, rng=rng))
                elif method == "wald":
                    tests.append(wald_type_statistic(effects, cov, H, alpha))
            except RankFXError as exc:
                raise type(exc)(f"hypothesis {H.label!r}, method {method}: {exc}") from exc
    if "kruskal-wallis" in methods:
        tests.append(kruskal_wallis(data, alpha, tables))

    decomposition = None
    if data.shape is not None and len(data.shape) == 2:
        decomposition = additive_decomposition(effects, *data.shape)
    cis = confidence_intervals(effects, cov, alpha, transform, labels=data.cell_names())
    return AnalysisReport(
        cells=data.cell_names(),
        n=data.n.tolist(),
        effects=effects,
        cov=cov,
        f1=f1,
        S2=S2.tolist(),
        tests=tests,
        cis=cis,
        decomposition=decomposition,
        factors=list(data.factors) if data.factors else None,
        metadata={
            "alpha": alpha,
            "transform": transform,
            "seed": seed,
            "mc_runs": mc_runs,
            "hypotheses": [H.label for H in specs],
            "versions": {
                "rankfx": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        },
    )
