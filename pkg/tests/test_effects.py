import numpy as np
import pytest

import oracles
from rankfx.effects import (
    additive_decomposition,
    empirical_effect_function,
    normalized_ecdf,
    pairwise_effect,
    pairwise_effects,
    stack_matrix,
    unweighted_effects,
    weighted_effects,
)
from rankfx.errors import LayoutError
from rankfx.ranks import Dataset


def _random_groups(rng, d, ties):
    out = []
    for _ in range(d):
        m = int(rng.integers(2, 7))
        out.append(rng.integers(0, 5, m).astype(float) if ties else rng.normal(size=m))
    return out


def test_pairwise_effect_disjoint_samples():
    assert pairwise_effect([1, 2], [3, 4]) == 1.0
    assert pairwise_effect([3, 4], [1, 2]) == 0.0
    assert pairwise_effect([1, 1], [1, 1]) == 0.5


def test_pairwise_effects_match_counting_oracle():
    rng = np.random.default_rng(11)
    for k in range(100):
        groups = _random_groups(rng, int(rng.integers(2, 5)), ties=k % 2 == 0)
        W = pairwise_effects(Dataset(tuple(groups)))
        W_ref, p_ref = oracles.effects_by_counting(groups)
        np.testing.assert_allclose(W, W_ref, atol=1e-12)
        np.testing.assert_allclose(unweighted_effects(Dataset(tuple(groups))).p, p_ref, atol=1e-12)


def test_weighted_effects_match_counting_oracle():
    rng = np.random.default_rng(12)
    for _ in range(50):
        groups = _random_groups(rng, 3, ties=True)
        np.testing.assert_allclose(
            weighted_effects(Dataset(tuple(groups))), oracles.weighted_effects_by_counting(groups), atol=1e-12
        )


def test_equal_sizes_give_equal_weighted_and_unweighted_effects():
    rng = np.random.default_rng(5)
    data = Dataset(tuple(rng.normal(size=8) for _ in range(4)))
    est = unweighted_effects(data)
    np.testing.assert_allclose(est.p, est.r, atol=1e-12)


def test_effects_sum_to_half_d():
    rng = np.random.default_rng(6)
    data = Dataset(tuple(rng.normal(size=k) for k in (3, 7, 4)))
    assert unweighted_effects(data).p.sum() == pytest.approx(1.5, abs=1e-12)


def test_stack_matrix_maps_stacked_effects_to_p():
    rng = np.random.default_rng(7)
    data = Dataset(tuple(rng.normal(size=k) for k in (3, 5, 4)))
    est = unweighted_effects(data)
    np.testing.assert_allclose(stack_matrix(3) @ est.w.T.ravel(), est.p, atol=1e-12)


def test_additive_decomposition_reconstructs_cells():
    p = np.array([0.46125, 0.855, 0.20875, 0.475])
    dec = additive_decomposition(p, 2, 2)
    P = 0.5 + dec.alpha[:, None] + dec.beta[None, :] + dec.gamma
    np.testing.assert_allclose(P.ravel(), p, atol=1e-15)
    assert abs(dec.gamma.sum(axis=0)).max() < 1e-15
    assert abs(dec.gamma.sum(axis=1)).max() < 1e-15
    with pytest.raises(LayoutError):
        additive_decomposition(p, 3, 2)


def test_normalized_ecdf_counts_ties_half():
    s = [1.0, 2.0, 2.0, 3.0]
    np.testing.assert_allclose(normalized_ecdf(s, [0.5, 2.0, 3.0, 4.0]), [0.0, 0.5, 0.875, 1.0])
    for x in (0.0, 1.0, 1.5, 2.0, 3.0):
        assert normalized_ecdf(s, x) == oracles.count_ecdf(s, x)


def test_effect_function_single_indicator_is_ecdf():
    data = Dataset(([1.0, 2.0, 2.0], [0.5, 3.0]))
    grid = [0.5, 1.0, 2.0, 3.0]
    rows = empirical_effect_function(data, [1.0, 0.0], grid)
    assert [v for _, v in rows] == [oracles.count_ecdf([1.0, 2.0, 2.0], x) for x in grid]
    zero = empirical_effect_function(data, [0.0, 0.0], grid)
    assert all(v == 0.0 for _, v in zero)
    with pytest.raises(LayoutError):
        empirical_effect_function(data, [1.0], grid)
