"""Mid-ranks and the rank tables every estimator in the package is built from."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDataError, LayoutError

__all__ = ["Dataset", "RankTables", "as_sample", "midranks", "build_rank_tables"]


def as_sample(values, name="sample") -> np.ndarray:
    """Validate ``values`` as a nonempty vector of finite reals and return a float copy."""
    x = np.array(values, dtype=float).ravel()
    if x.size == 0:
        raise InvalidDataError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise InvalidDataError(f"{name} contains non-finite values")
    x.setflags(write=False)
    return x


def midranks(values) -> np.ndarray:
    """Mid-ranks of ``values``: tied observations share the mean of the ranks they occupy.

    ``midranks(v)[k] == 1 + #{j: v[j] < v[k]} + 0.5 * #{j != k: v[j] == v[k]}``.
    Ties are exact float equality.

    >>> midranks([1, 2, 2, 3]).tolist()
    [1.0, 2.5, 2.5, 4.0]
    """
    x = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidDataError("cannot rank non-finite values")
    n = x.size
    if n == 0:
        return np.empty(0)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    new_run = np.empty(n, dtype=bool)
    new_run[0] = True
    np.not_equal(xs[1:], xs[:-1], out=new_run[1:])
    starts = np.flatnonzero(new_run)
    ends = np.append(starts[1:], n)
    run_rank = 0.5 * (starts + 1 + ends)
    ranks = np.empty(n)
    ranks[order] = run_rank[np.cumsum(new_run) - 1]
    return ranks


@dataclass(frozen=True, eq=False)
class Dataset:
    """Independent samples, one per cell of a (possibly factorial) design.

    Parameters
    ----------
    groups : sequence of array_like
        One sample per cell. For a two-way layout the order is row-major in
        (level of factor A, level of factor B).
    labels : sequence of tuple of str, optional
        Factor-level tuple of each cell.
    factors : sequence of str, optional
        Factor names, one per entry of each label tuple.
    shape : tuple of int, optional
        Number of levels per factor, e.g. ``(a, b)``; ``prod(shape)`` must equal
        the number of groups.
    """

    groups: tuple
    labels: tuple | None = None
    factors: tuple | None = None
    shape: tuple | None = None
    levels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        groups = tuple(as_sample(g, name=f"group {i + 1}") for i, g in enumerate(self.groups))
        if len(groups) < 2:
            raise InvalidDataError(f"need at least 2 groups, got {len(groups)}")
        object.__setattr__(self, "groups", groups)
        if self.shape is not None:
            shape = tuple(int(s) for s in self.shape)
            if int(np.prod(shape)) != len(groups):
                raise LayoutError(f"layout {shape} has {int(np.prod(shape))} cells but data has {len(groups)} groups")
            object.__setattr__(self, "shape", shape)
        if self.labels is not None:
            labels = tuple(tuple(str(v) for v in lab) for lab in self.labels)
            if len(labels) != len(groups):
                raise LayoutError("one label per group is required")
            object.__setattr__(self, "labels", labels)
        if self.factors is not None:
            object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def d(self) -> int:
        return len(self.groups)

    @property
    def n(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def N(self) -> int:
        return int(sum(g.size for g in self.groups))

    def pooled(self) -> np.ndarray:
        return np.concatenate(self.groups)

    def cell_names(self) -> list[str]:
        if self.labels is None:
            return [f"group{i + 1}" for i in range(self.d)]
        return [":".join(lab) for lab in self.labels]


@dataclass(frozen=True)
class RankTables:
    """Pooled, within-group and pairwise mid-ranks of a Dataset.

    ``pairwise[l][i]`` holds the ranks of the observations of group ``i`` among the
    ``n_l + n_i`` observations of groups ``l`` and ``i``; the diagonal holds the
    within-group ranks.
    """

    pooled: tuple
    within: tuple
    pairwise: tuple

    def pair(self, l: int, i: int) -> np.ndarray:
        return self.pairwise[l][i]


def build_rank_tables(data: Dataset) -> RankTables:
    d = data.d
    n = data.n
    bounds = np.concatenate([[0], np.cumsum(n)])
    pooled_all = midranks(data.pooled())
    pooled = tuple(pooled_all[bounds[i]:bounds[i + 1]] for i in range(d))
    within = tuple(midranks(g) for g in data.groups)
    pairwise = [[None] * d for _ in range(d)]
    for i in range(d):
        pairwise[i][i] = within[i]
        for l in range(i + 1, d):
            r = midranks(np.concatenate([data.groups[l], data.groups[i]]))
            pairwise[i][l] = r[: n[l]]
            pairwise[l][i] = r[n[l]:]
    return RankTables(pooled=pooled, within=within, pairwise=tuple(tuple(row) for row in pairwise))
