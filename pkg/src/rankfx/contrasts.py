"""Hypothesis matrices: centering matrices, two-way projections and general contrasts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidContrastError

__all__ = [
    "HypothesisSpec",
    "centering_matrix",
    "moore_penrose",
    "matrix_rank",
    "projection_from_contrast",
    "one_way_hypothesis",
    "two_way_hypotheses",
]


@dataclass(frozen=True)
class HypothesisSpec:
    """A linear hypothesis ``C p = 0`` together with its projection ``T = C'(CC')^+ C``."""

    C: np.ndarray
    T: np.ndarray
    label: str = "custom"

    @property
    def d(self) -> int:
        return self.T.shape[0]


def centering_matrix(a: int) -> np.ndarray:
    if a < 1:
        raise DomainError(f"centering matrix needs a >= 1, got {a}")
    return np.eye(a) - np.full((a, a), 1.0 / a)


def _svd_cutoff(s, shape):
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * s[0]


def moore_penrose(M) -> np.ndarray:
    """Moore-Penrose inverse via SVD.

    Singular values at or below ``max(M.shape) * eps * s_max`` count as zero.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DomainError("moore_penrose expects a 2-d matrix")
    if not np.all(np.isfinite(M)):
        raise DomainError("matrix has non-finite entries")
    if M.size == 0:
        return M.T.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > _svd_cutoff(s, M.shape)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def matrix_rank(M) -> int:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > _svd_cutoff(s, M.shape)))


def projection_from_contrast(C, label: str = "custom") -> HypothesisSpec:
    """Build the hypothesis ``C p = 0``.

    Rows of ``C`` must sum to zero: ``sum(p) = d/2`` is fixed by construction,
    so only contrasts are testable.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if not np.all(np.isfinite(C)):
        raise InvalidContrastError("contrast matrix has non-finite entries")
    tol = 1e-10 * max(1.0, np.abs(C).max(initial=0.0))
    bad = np.flatnonzero(np.abs(C.sum(axis=1)) > tol)
    if bad.size:
        raise InvalidContrastError(f"rows {(bad + 1).tolist()} of the contrast matrix do not sum to zero")
    T = C.T @ moore_penrose(C @ C.T) @ C
    T = 0.5 * (T + T.T)
    return HypothesisSpec(C=C, T=T, label=label)


def one_way_hypothesis(d: int) -> HypothesisSpec:
    P = centering_matrix(d)
    return HypothesisSpec(C=P, T=P, label="one-way")


def two_way_hypotheses(a: int, b: int) -> tuple[HypothesisSpec, HypothesisSpec, HypothesisSpec]:
    """Projections for the main effects A, B and the interaction AB of a crossed ``a x b`` layout.

    Cells are ordered row-major in (level of A, level of B).
    """
    if a < 2 or b < 2:
        raise DomainError(f"two-way layout needs a, b >= 2, got {a}x{b}")
    Pa, Pb = centering_matrix(a), centering_matrix(b)
    Ja, Jb = np.full((a, a), 1.0 / a), np.full((b, b), 1.0 / b)
    TA = np.kron(Pa, Jb)
    TB = np.kron(Ja, Pb)
    TAB = np.kron(Pa, Pb)
    return (
        HypothesisSpec(C=TA, T=TA, label="main-A"),
        HypothesisSpec(C=TB, T=TB, label="main-B"),
        HypothesisSpec(C=TAB, T=TAB, label="interaction-AB"),
    )
