"""Monte-Carlo harness for type-I error and power of the implemented tests.

Replication ``r`` draws its data from substream ``(seed, r)`` and, when the
eigenvalue test is requested, its inner Monte-Carlo draws from ``(seed, r, 1)``.
Replications are split into a fixed chunk plan that does not depend on the
number of workers, so reports are identical for any ``RANKFX_THREADS``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contrasts import one_way_hypothesis
from .covariance import covariance_estimate, f1_components
from .effects import unweighted_effects
from .errors import DomainError, RankFXError
from .inference import (
    METHODS,
    ats_box_test,
    ats_eigen_test,
    ats_f_test,
    kruskal_wallis,
    wald_type_statistic,
)
from .numerics import RngStream, double_exponential, standard_normal
from .ranks import Dataset, build_rank_tables

__all__ = [
    "SimSetting",
    "SETTINGS",
    "DISTRIBUTIONS",
    "COLUMN_NAMES",
    "SimulationReport",
    "setting",
    "generate_dataset",
    "type_one_error",
    "power_curve",
    "power_alternative",
    "effect_consistency_check",
    "worker_count",
]

DISTRIBUTIONS = ("normal", "double-exponential", "lognormal")
COLUMN_NAMES = {
    "kruskal-wallis": "KW",
    "wald": "WTS",
    "ats-eigen": "ATS-eigen",
    "ats-box": "ATS-Box",
    "ats-f": "ATS-F",
}
_CHUNK = 250
_SQ2, _SQ5 = math.sqrt(2.0), math.sqrt(5.0)

# setting id -> (base sizes, scale factors)
SETTINGS = {
    1: ((5, 5, 5, 5), (1.0, 1.0, 1.0, 1.0)),
    2: ((10, 20, 30, 40), (1.0, 1.0, 1.0, 1.0)),
    3: ((5, 5, 5, 5), (1.0, _SQ2, 2.0, _SQ5)),
    4: ((10, 20, 30, 40), (1.0, _SQ2, 2.0, _SQ5)),
    5: ((10, 20, 30, 40), (_SQ5, 2.0, _SQ2, 1.0)),
}


@dataclass(frozen=True)
class SimSetting:
    """One cell of a simulation table: sizes ``base + m``, scales ``sigma``, centers ``mu``."""

    setting_id: int
    distribution: str = "normal"
    m: int = 0
    mu: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.setting_id not in SETTINGS:
            raise DomainError(f"unknown setting {self.setting_id}; choose from {sorted(SETTINGS)}")
        if self.distribution not in DISTRIBUTIONS:
            raise DomainError(f"unknown distribution {self.distribution!r}")
        if self.m < 0:
            raise DomainError(f"increment m must be >= 0, got {self.m}")
        if len(self.mu) != 4:
            raise DomainError("mu needs one center per group")

    @property
    def sizes(self) -> tuple:
        return tuple(b + self.m for b in SETTINGS[self.setting_id][0])

    @property
    def sigma(self) -> tuple:
        return SETTINGS[self.setting_id][1]


def setting(setting_id: int, distribution: str = "normal", m: int = 0) -> SimSetting:
    return SimSetting(setting_id, distribution, m)


def _errors(distribution, rng, sizes):
    total = sum(sizes)
    if distribution == "double-exponential":
        e = double_exponential(rng, total)
    else:
        e = standard_normal(rng, total)
    return np.split(e, np.cumsum(sizes)[:-1])


def _build(distribution, errors, sigma, mu) -> Dataset:
    if distribution == "lognormal":
        groups = [np.exp(m + s * e) for e, s, m in zip(errors, sigma, mu)]
    else:
        groups = [m + s * e for e, s, m in zip(errors, sigma, mu)]
    return Dataset(tuple(groups))


def generate_dataset(setting: SimSetting, stream: RngStream) -> Dataset:
    """Draw ``X_ik = mu_i + sigma_i * eps_ik`` (or ``exp`` of a normal for lognormal data).

    Errors are standardized to mean 0 and variance 1.
    """
    errors = _errors(setting.distribution, stream.generator(), setting.sizes)
    return _build(setting.distribution, errors, setting.sigma, setting.mu)


def _rejections(data: Dataset, methods, alpha, mc_runs, mc_stream: RngStream) -> dict:
    tables = build_rank_tables(data)
    out = {}
    needs_ats = any(m != "kruskal-wallis" for m in methods)
    if needs_ats:
        effects = unweighted_effects(data, tables)
        cov = covariance_estimate(data, tables)
        H = one_way_hypothesis(data.d)
    for method in methods:
        if method == "kruskal-wallis":
            res = kruskal_wallis(data, alpha, tables)
        elif method == "ats-f":
            res = ats_f_test(effects, cov, H, f1_components(data, tables)[1], alpha)
        elif method == "ats-box":
            res = ats_box_test(effects, cov, H, alpha)
        elif method == "ats-eigen":
            res = ats_eigen_test(effects, cov, H, alpha, mc_runs, mc_stream.seed, rng=mc_stream.generator())
        else:
            res = wald_type_statistic(effects, cov, H, alpha)
        out[method] = res.statistic > res.critical_value
    return out


def _check_methods(methods):
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise DomainError(f"methods must be a nonempty subset of {METHODS}, got {methods}")
    return methods


def worker_count() -> int:
    """Workers allowed by ``RANKFX_THREADS`` (default 1)."""
    raw = os.environ.get("RANKFX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise DomainError(f"RANKFX_THREADS must be an integer, got {raw!r}") from None


def _chunks(nsim):
    return [(a, min(a + _CHUNK, nsim)) for a in range(0, nsim, _CHUNK)]


def _map_chunks(fn, tasks):
    workers = min(worker_count(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _type_one_chunk(task):
    sim, methods, alpha, mc_runs, seed, (a, b) = task
    counts = dict.fromkeys(methods, 0)
    failed = 0
    root = RngStream(seed)
    for r in range(a, b):
        try:
            data = generate_dataset(sim, root.child(r))
            rej = _rejections(data, methods, alpha, mc_runs, root.child(r, 1))
        except RankFXError:
            failed += 1
            continue
        for m, v in rej.items():
            counts[m] += int(v)
    return counts, failed


@dataclass
class SimulationReport:
    """Rejection rates of each method over ``nsim`` replications.

    ``rows`` holds one dict per table row; each row has the row keys plus one
    rate per method. Rates are computed over the successful replications.
    """

    methods: tuple
    nsim: int
    alpha: float
    seed: int
    rows: list
    row_keys: tuple
    runtime: float = 0.0
    extra: dict = field(default_factory=dict)

    def rate(self, method: str, row: int = 0) -> float:
        return self.rows[row][method]

    def standard_error(self, method: str, row: int = 0) -> float:
        r = self.rows[row][method]
        n = self.nsim - self.rows[row]["failed"]
        return math.sqrt(r * (1 - r) / n) if n > 0 else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = list(self.row_keys) + [COLUMN_NAMES[m] for m in self.methods]
        header += [f"se_{COLUMN_NAMES[m]}" for m in self.methods] + ["nsim", "failed"]
        writer.writerow(header)
        for k, row in enumerate(self.rows):
            values = [row[key] for key in self.row_keys]
            values += [f"{row[m]:.4f}" for m in self.methods]
            values += [f"{self.standard_error(m, k):.4f}" for m in self.methods]
            values += [self.nsim, row["failed"]]
            writer.writerow(values)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "columns": {m: COLUMN_NAMES[m] for m in self.methods},
            "nsim": self.nsim,
            "alpha": self.alpha,
            "seed": self.seed,
            "runtime": self.runtime,
            "rows": [
                dict(row, **{f"se_{m}": self.standard_error(m, k) for m in self.methods})
                for k, row in enumerate(self.rows)
            ],
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def type_one_error(
    sim: SimSetting,
    methods=METHODS,
    nsim: int = 2000,
    alpha: float = 0.05,
    seed: int = 0,
    mc_runs: int = 10_000,
) -> SimulationReport:
    """Rejection rates under the null for one setting, distribution and increment."""
    if nsim < 100:
        raise DomainError(f"nsim must be at least 100, got {nsim}")
    methods = _check_methods(methods)
    start = time.perf_counter()
    tasks = [(sim, methods, alpha, mc_runs, seed, ch) for ch in _chunks(nsim)]
    counts = dict.fromkeys(methods, 0)
    failed = 0
    for c, f in _map_chunks(_type_one_chunk, tasks):
        failed += f
        for m in methods:
            counts[m] += c[m]
    ok = nsim - failed
    row = {
        "setting": sim.setting_id,
        "distribution": sim.distribution,
        "m": sim.m,
        "sizes": "-".join(str(s) for s in sim.sizes),
        "failed": failed,
    }
    row.update({m: (float(counts[m] / ok) if ok else float("nan")) for m in methods})
    return SimulationReport(
        methods=methods,
        nsim=nsim,
        alpha=alpha,
        seed=seed,
        rows=[row],
        row_keys=("setting", "distribution", "m", "sizes"),
        runtime=time.perf_counter() - start,
    )


def power_alternative(kind: str, delta: float) -> tuple:
    """Group centers for the one-point ``(0, 0, 0, delta)`` or trend ``(delta/4, ..., delta)`` alternative."""
    if kind == "one-point":
        return (0.0, 0.0, 0.0, float(delta))
    if kind == "trend":
        return tuple(delta * k / 4 for k in (1, 2, 3, 4))
    raise DomainError(f"unknown alternative {kind!r}; use 'one-point' or 'trend'")


def _power_chunk(task):
    kind, deltas, n, methods, alpha, mc_runs, seed, (a, b) = task
    counts = np.zeros((len(deltas), len(methods)), dtype=np.int64)
    failed = np.zeros(len(deltas), dtype=np.int64)
    root = RngStream(seed)
    sizes = (n,) * 4
    sigma = (1.0,) * 4
    for r in range(a, b):
        # the same errors are reused for every delta (common random numbers)
        errors = _errors("normal", root.child(r).generator(), sizes)
        for k, delta in enumerate(deltas):
            data = _build("normal", errors, sigma, power_alternative(kind, delta))
            try:
                rej = _rejections(data, methods, alpha, mc_runs, root.child(r, 1))
            except RankFXError:
                failed[k] += 1
                continue
            counts[k] += [int(rej[m]) for m in methods]
    return counts, failed


def power_curve(
    alternative: str = "one-point",
    deltas=None,
    n: int = 15,
    nsim: int = 2000,
    seed: int = 0,
    methods=("kruskal-wallis", "ats-f"),
    alpha: float = 0.05,
    mc_runs: int = 10_000,
) -> SimulationReport:
    """Rejection rates for normal data with equal sizes ``n`` over a grid of shifts.

    The default grid is ``0, 0.1, ..., 1.6``.
    """
    if deltas is None:
        deltas = [round(0.1 * k, 1) for k in range(17)]
    deltas = [float(x) for x in deltas]
    if any(x < 0 for x in deltas):
        raise DomainError("shifts must be nonnegative")
    if n < 2:
        raise DomainError(f"group size must be at least 2, got {n}")
    if nsim < 100:
        raise DomainError(f"nsim must be at least 100, got {nsim}")
    power_alternative(alternative, 0.0)
    methods = _check_methods(methods)
    start = time.perf_counter()
    tasks = [(alternative, deltas, n, methods, alpha, mc_runs, seed, ch) for ch in _chunks(nsim)]
    counts = np.zeros((len(deltas), len(methods)), dtype=np.int64)
    failed = np.zeros(len(deltas), dtype=np.int64)
    for c, f in _map_chunks(_power_chunk, tasks):
        counts += c
        failed += f
    rows = []
    for k, delta in enumerate(deltas):
        ok = nsim - int(failed[k])
        row = {"alternative": alternative, "n": n, "delta": f"{delta:.1f}", "failed": int(failed[k])}
        row.update({m: (float(counts[k, j] / ok) if ok else float("nan")) for j, m in enumerate(methods)})
        rows.append(row)
    return SimulationReport(
        methods=methods,
        nsim=nsim,
        alpha=alpha,
        seed=seed,
        rows=rows,
        row_keys=("alternative", "n", "delta"),
        runtime=time.perf_counter() - start,
    )


def effect_consistency_check(sizes=(2000, 1000, 500), means=(1.0, 0.0, -1.0), seed: int = 0):
    """Estimate unweighted and weighted effects for normal groups with unit variance.

    Returns ``(p_hat, r_hat)``.
    """
    if min(sizes) < 1:
        raise DomainError("every group needs at least one observation")
    rng = RngStream(seed).generator()
    data = Dataset(tuple(m + rng.standard_normal(k) for m, k in zip(means, sizes)))
    est = unweighted_effects(data)
    return est.p, est.r
