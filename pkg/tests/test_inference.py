import numpy as np
import pytest
from scipy import stats

import oracles
from rankfx.contrasts import one_way_hypothesis, projection_from_contrast
from rankfx.covariance import CovarianceEstimate, covariance_estimate, f1_components
from rankfx.dataio import load_leucocytes
from rankfx.effects import EffectEstimates, unweighted_effects
from rankfx.errors import DegenerateError, DomainError, InvalidDataError
from rankfx.inference import (
    analyze,
    anova_type_statistic,
    ats_box_test,
    ats_eigen_test,
    ats_f_test,
    box_df,
    confidence_intervals,
    kruskal_wallis,
    wald_type_statistic,
)
from rankfx.numerics import chi2_quantile
from rankfx.ranks import Dataset


def _fit(groups):
    data = Dataset(tuple(groups))
    return data, unweighted_effects(data), covariance_estimate(data)


def _synthetic(V, p=None):
    d = V.shape[0]
    p = np.full(d, 0.5) if p is None else np.asarray(p, float)
    return EffectEstimates(p=p, w=np.full((d, d), 0.5), n=np.full(d, 10)), CovarianceEstimate(V=V, N=10 * d)


def test_null_point_gives_zero_statistics():
    data, est, cov = _fit([[1.0, 2.0, 3.0]] * 3)
    H = one_way_hypothesis(3)
    assert anova_type_statistic(est, cov, H) == pytest.approx(0.0, abs=1e-12)
    assert wald_type_statistic(est, cov, H).statistic == pytest.approx(0.0, abs=1e-12)


def test_two_sample_reduces_to_brunner_munzel():
    rng = np.random.default_rng(8)
    for k in range(60):
        x = rng.integers(0, 6, int(rng.integers(3, 9))).astype(float) if k % 2 else rng.normal(size=int(rng.integers(3, 9)))
        y = rng.integers(0, 6, int(rng.integers(3, 9))).astype(float) if k % 2 else rng.normal(1, 2, int(rng.integers(3, 9)))
        data, est, cov = _fit([x, y])
        try:
            S2, f1 = f1_components(data)
        except DegenerateError:
            continue
        res = ats_f_test(est, cov, one_way_hypothesis(2), f1)
        stat, df, p = oracles.brunner_munzel(x, y)
        assert res.statistic == pytest.approx(stat**2, rel=1e-10, abs=1e-12)
        assert res.df[0] == pytest.approx(1.0, abs=1e-12)
        assert res.df[1] == pytest.approx(df, rel=1e-10)
        assert res.p_value == pytest.approx(p, rel=1e-9, abs=1e-12)
        bm = stats.brunnermunzel(x, y, distribution="t")
        assert res.p_value == pytest.approx(bm.pvalue, rel=1e-9, abs=1e-12)
        wald = wald_type_statistic(est, cov, one_way_hypothesis(2))
        assert wald.statistic == pytest.approx(res.statistic, rel=1e-10)
        assert wald.df == (1,)


def test_eigen_single_eigenvalue_matches_chi2_quantile():
    V = np.diag([2.0, 0.0, 0.0])
    est, cov = _synthetic(V)
    H = projection_from_contrast([[1.0, -1.0, 0.0]])
    res = ats_eigen_test(est, cov, H, mc_runs=100_000, seed=3)
    assert res.critical_value == pytest.approx(chi2_quantile(0.95, 1), abs=0.1)
    assert len(res.df) == 1
    assert box_df(cov, H) == pytest.approx(1.0, abs=1e-12)


def test_eigen_equal_eigenvalues_is_scaled_chi2():
    k = 3
    est, cov = _synthetic(np.eye(k + 1))
    H = one_way_hypothesis(k + 1)
    res = ats_eigen_test(est, cov, H, mc_runs=100_000, seed=9)
    assert res.critical_value == pytest.approx(chi2_quantile(0.95, k) / k, abs=0.03)
    assert box_df(cov, H) == pytest.approx(k, rel=1e-12)


def test_eigen_is_seed_deterministic_and_validates_runs():
    data, est, cov = _fit([np.arange(5.0), np.arange(5.0) + 1.5, np.arange(5.0) * 2])
    H = one_way_hypothesis(3)
    a = ats_eigen_test(est, cov, H, seed=5)
    b = ats_eigen_test(est, cov, H, seed=5)
    assert a == b
    assert 0 < a.p_value <= 1
    with pytest.raises(DomainError):
        ats_eigen_test(est, cov, H, mc_runs=999)


def test_degenerate_projection_raises():
    est, cov = _synthetic(np.zeros((3, 3)))
    H = one_way_hypothesis(3)
    with pytest.raises(DegenerateError):
        anova_type_statistic(est, cov, H)
    with pytest.raises(DegenerateError):
        wald_type_statistic(est, cov, H)
    with pytest.raises(DegenerateError):
        ats_eigen_test(est, cov, H)


def test_box_and_f_tests_consistent():
    rng = np.random.default_rng(2)
    data, est, cov = _fit([rng.normal(size=6), rng.normal(size=8), rng.normal(size=7)])
    H = one_way_hypothesis(3)
    _, f1 = f1_components(data)
    box = ats_box_test(est, cov, H)
    ftest = ats_f_test(est, cov, H, f1)
    big = ats_f_test(est, cov, H, 1e6)
    assert box.df[0] >= 1.0
    assert box.statistic == ftest.statistic
    assert big.critical_value == pytest.approx(box.critical_value, abs=1e-4)
    assert (box.statistic > box.critical_value) == (box.p_value < 0.05)


def test_f_p_value_decreasing_in_statistic():
    est, cov = _synthetic(np.eye(3))
    H = one_way_hypothesis(3)
    pvals = []
    for shift in np.linspace(0.0, 0.3, 7):
        e = EffectEstimates(p=np.array([0.5 - shift, 0.5, 0.5 + shift]), w=est.w, n=est.n)
        pvals.append(ats_f_test(e, cov, H, 20.0).p_value)
    assert all(a > b for a, b in zip(pvals, pvals[1:]))


def test_ats_invariant_to_contrast_representation():
    rng = np.random.default_rng(4)
    _, est, cov = _fit([rng.normal(size=5), rng.normal(1, 1, 7), rng.normal(size=6), rng.normal(2, 3, 5)])
    C = np.array([[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])
    H1 = projection_from_contrast(C)
    H2 = projection_from_contrast(np.vstack([5 * C, C.sum(axis=0)]))
    assert anova_type_statistic(est, cov, H1) == pytest.approx(anova_type_statistic(est, cov, H2), rel=1e-12)
    assert box_df(cov, H1) == pytest.approx(box_df(cov, H2), rel=1e-12)
    w1 = wald_type_statistic(est, cov, H1)
    w2 = wald_type_statistic(est, cov, H2)
    assert w1.statistic == pytest.approx(w2.statistic, rel=1e-9) and w1.df == w2.df


def test_kruskal_wallis_matches_oracles():
    rng = np.random.default_rng(10)
    for _ in range(50):
        groups = [rng.integers(0, 8, int(rng.integers(2, 9))).astype(float) for _ in range(int(rng.integers(2, 5)))]
        if np.unique(np.concatenate(groups)).size == 1:
            continue
        res = kruskal_wallis(Dataset(tuple(groups)))
        ref = stats.kruskal(*groups)
        assert res.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert res.p_value == pytest.approx(ref.pvalue, rel=1e-10)
        assert res.statistic == pytest.approx(oracles.kruskal_wallis_by_hand(groups), rel=1e-12)


def test_kruskal_wallis_textbook_example():
    # ranks 1..9 split as {1,2,3},{4,5,6},{7,8,9}: H = 12/(9*10) * 3*(2^2+5^2+8^2)/... by hand
    groups = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]
    H = 12 / 90 * (6**2 / 3 + 15**2 / 3 + 24**2 / 3) - 30
    assert kruskal_wallis(Dataset(tuple(groups))).statistic == pytest.approx(H, rel=1e-12)
    assert H == pytest.approx(7.2)


def test_kruskal_wallis_interleaved_near_zero_and_tied_error():
    res = kruskal_wallis(Dataset(([1.0, 4.0, 5.0, 8.0], [2.0, 3.0, 6.0, 7.0])))
    assert res.statistic < 0.1
    with pytest.raises(DegenerateError):
        kruskal_wallis(Dataset(([1.0, 1.0], [1.0, 1.0])))


def test_logit_intervals_match_formula():
    rng = np.random.default_rng(12)
    _, est, cov = _fit([rng.normal(size=6), rng.normal(1, 1, 9), rng.normal(size=7)])
    for ci in confidence_intervals(est, cov, 0.05, "logit"):
        lo, hi = oracles.logit_interval(ci.estimate, cov.V[ci.index, ci.index], cov.N, 0.05)
        assert ci.lower == pytest.approx(lo, abs=1e-12) and ci.upper == pytest.approx(hi, abs=1e-12)
        assert 0 < ci.lower <= ci.estimate <= ci.upper < 1


def test_identity_intervals_symmetric_and_zero_variance():
    est, cov = _synthetic(np.zeros((3, 3)), p=[0.3, 0.5, 0.7])
    for ci in confidence_intervals(est, cov, transform="identity"):
        assert ci.lower == ci.upper == ci.estimate
    est, cov = _synthetic(np.eye(3) * 0.1, p=[0.3, 0.5, 0.7])
    for ci in confidence_intervals(est, cov, transform="identity"):
        assert ci.estimate - ci.lower == pytest.approx(ci.upper - ci.estimate, abs=1e-15)
    with pytest.raises(DomainError):
        confidence_intervals(_synthetic(np.eye(2), p=[0.0, 1.0])[0], cov, transform="logit")


def test_analyze_one_way_report():
    rng = np.random.default_rng(13)
    data = Dataset(tuple(rng.normal(size=k) for k in (6, 8, 7)))
    report = analyze(data, mc_runs=2000)
    assert report.effects.p.sum() == pytest.approx(1.5, abs=1e-12)
    assert {t.method for t in report.tests} == {"ats-f", "ats-box", "ats-eigen", "wald", "kruskal-wallis"}
    assert report.decomposition is None
    d = report.to_dict()
    for key in ("effects", "weighted_effects", "tests", "cis", "metadata"):
        assert key in d
    assert d["metadata"]["mc_runs"] == 2000 and d["metadata"]["seed"] == 0
    for t in report.tests:
        assert 0 <= t.p_value <= 1 and t.statistic >= 0


def test_analyze_rejects_single_group_and_bad_alpha():
    with pytest.raises(InvalidDataError):
        analyze(Dataset(([1.0, 2.0],)))
    with pytest.raises(DomainError):
        analyze(Dataset(([1.0, 2.0], [3.0, 1.5])), alpha=0.7)


def test_analyze_error_names_hypothesis():
    data = Dataset(([1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]), shape=(2, 2))
    report = analyze(data, methods=("ats-f",))
    assert all(t.statistic == pytest.approx(0.0, abs=1e-12) for t in report.tests)
    flat = Dataset(([1.0, 1.0], [1.0, 1.0]))
    with pytest.raises(DegenerateError, match="hypothesis"):
        analyze(flat, methods=("ats-box",))


def test_leucocyte_statistics_match_oracle_pipeline():
    # every quantity recomputed from counting oracles and explicit Kronecker projections
    data = load_leucocytes()
    groups = [np.asarray(g) for g in data.groups]
    _, p = oracles.effects_by_counting(groups)
    V = oracles.direct_expansion_V(groups)
    P2, J2 = np.eye(2) - 0.5, np.full((2, 2), 0.5)
    report = analyze(data, methods=("ats-f",))
    for T, label in [(np.kron(P2, J2), "food"), (np.kron(J2, P2), "treatment"), (np.kron(P2, P2), "food:treatment")]:
        Q = 40 * p @ T @ p / np.trace(T @ V)
        assert report.test("ats-f", label).statistic == pytest.approx(Q, rel=1e-12)


def test_leucocyte_frozen_values():
    # regression values for the bundled data, frozen from the oracle pipeline above
    report = analyze(load_leucocytes(), methods=("ats-f",))
    np.testing.assert_allclose(report.effects.p, [0.46125, 0.855, 0.20875, 0.475], atol=1e-12)
    assert report.test("ats-f", "food").statistic == pytest.approx(42.844042838, abs=1e-6)
    assert report.test("ats-f", "treatment").statistic == pytest.approx(32.8169927802, abs=1e-6)
    assert report.test("ats-f", "food:treatment").statistic == pytest.approx(1.86764001915, abs=1e-6)
    assert report.f1 == pytest.approx(26.4839119962, abs=1e-6)
    for t in report.tests:
        assert t.df[0] == pytest.approx(1.0, abs=1e-9)


def test_leucocyte_variant_reference_values():
    # Replacing one tied 6.0 of the reduced/drug cell by 6.1 reproduces the
    # reference table to its printed precision, except the food statistic
    # (42.500 here); see the decisions ledger.
    data = load_leucocytes()
    g4 = np.array(data.groups[3])
    g4[2] = 6.1
    variant = Dataset(data.groups[:3] + (g4,), labels=data.labels, factors=data.factors, shape=data.shape)
    report = analyze(variant, methods=("ats-f",))
    np.testing.assert_allclose(report.effects.p, [0.460, 0.855, 0.209, 0.476], atol=1e-3 + 1e-12)
    assert report.test("ats-f", "treatment").statistic == pytest.approx(33.191, abs=1e-3)
    assert report.test("ats-f", "food:treatment").statistic == pytest.approx(1.868, abs=1e-3)
    assert report.test("ats-f", "food:treatment").p_value == pytest.approx(0.1832, abs=5e-4)
    assert report.f1 == pytest.approx(26.492, abs=1e-3)
    assert report.test("ats-f", "food").statistic == pytest.approx(42.4997, abs=1e-3)
    limits = [(0.355, 0.568), (0.818, 0.885), (0.140, 0.301), (0.375, 0.579)]
    for ci, (lo, hi) in zip(report.cis, limits):
        assert abs(ci.lower - lo) <= 1e-3 + 1e-12 and abs(ci.upper - hi) <= 1e-3 + 1e-12
