import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from asdprosody.features import FEATURE_NAMES, LabeledDataset
from asdprosody.stats import (NormalizationParams, betainc, class_statistics,
                              format_class_statistics, minmax_fit, minmax_fit_apply,
                              pooled_t_test, rank_features, t_cdf, t_ppf, t_sf2, welch_t_test)

# frozen from the closed-form even-df evaluation below (df = 8, t = -1)
P_EXAMPLE = 0.34659350708733405


def t_sf2_even_df(t, df):
    """Two-sided tail of Student's t for even integer df, by the finite cosine series."""
    theta = math.atan(abs(t) / math.sqrt(df))
    c2 = math.cos(theta) ** 2
    term, total = 1.0, 1.0
    for j in range(1, df // 2):
        term *= c2 * (2 * j - 1) / (2 * j)
        total += term
    return 1.0 - math.sin(theta) * total


def t_sf2_simpson(t, df, n=20000):
    """Two-sided tail as 1 - 2 * integral of the t density over [0, |t|], Simpson's rule."""
    h = abs(t) / n
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
    total = 0.0
    for i in range(n + 1):
        w = 1 if i in (0, n) else (4 if i % 2 else 2)
        total += w * c * (1.0 + (i * h) ** 2 / df) ** (-(df + 1) / 2)
    return 1.0 - 2.0 * total * h / 3.0


def welch_by_hand(a, b):
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se2 = va / na + vb / nb
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return t, df


def _ds(X, labels):
    X = np.asarray(X, dtype=float)
    names = FEATURE_NAMES[: X.shape[1]]
    return LabeledDataset(X, labels, [str(i) for i in range(len(labels))], names)


def test_minmax_examples():
    ds = _ds([[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]], ["ASD", "TD", "TD"])
    out, params = minmax_fit_apply(ds)
    assert out.X[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert out.X[:, 1].tolist() == [0.0, 0.0, 0.0]
    new = params.apply(_ds([[20.0, 4.0]], ["ASD"]))
    assert new.X[0, 0] == 3.0
    again = NormalizationParams.from_dict(params.to_dict())
    assert np.array_equal(again.apply(ds).X, out.X)
    with pytest.raises(ValueError):
        minmax_fit(_ds([[1.0, 2.0]], ["ASD"]))


@given(arrays(np.float64, (6, 4), elements=st.floats(-1e6, 1e6)))
def test_minmax_range(X):
    out, params = minmax_fit_apply(_ds(X, ["ASD", "TD"] * 3))
    assert np.all(out.X >= -1) and np.all(out.X <= 1)
    assert np.all(params.maximum >= params.minimum)
    for j in range(4):
        if params.maximum[j] > params.minimum[j]:
            assert out.X[:, j].min() == -1.0 and out.X[:, j].max() == 1.0


def test_welch_example_closed_form():
    a, b = [1, 2, 3, 4, 5], [2, 3, 4, 5, 6]
    r = welch_t_test(a, b)
    t, df = welch_by_hand(a, b)
    assert abs(r.t - t) < 1e-6 and r.t == pytest.approx(-1.0)
    assert df == pytest.approx(8.0) and r.df == pytest.approx(8.0)
    assert abs(r.p - t_sf2_even_df(t, 8)) < 1e-4
    assert r.p == pytest.approx(P_EXAMPLE, abs=1e-12)


def test_welch_limits():
    r = welch_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (r.t, r.p) == (0.0, 1.0)
    assert welch_t_test([5.0, 5.0], [5.0, 5.0]).p == 1.0
    zero_var = welch_t_test([1.0, 1.0], [2.0, 2.0])
    assert zero_var.p == 0.0 and zero_var.t == -math.inf
    assert welch_t_test([0.0, 1e-3, -1e-3], [100.0, 100.001, 99.999]).p < 1e-6
    with pytest.raises(ValueError):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        welch_t_test([1.0, np.nan], [1.0, 2.0])


def test_t_distribution_against_scipy():
    for df in (1, 2.5, 8, 30.7, 200):
        for t in (-12.0, -2.0, -0.3, 0.0, 0.7, 3.3):
            assert abs(t_sf2(t, df) - 2 * scipy.stats.t.sf(abs(t), df)) < 1e-12
            assert abs(t_cdf(t, df) - scipy.stats.t.cdf(t, df)) < 1e-12
        for q in (0.005, 0.025, 0.5, 0.9, 0.975):
            assert abs(t_ppf(q, df) - scipy.stats.t.ppf(q, df)) < 1e-8
    for a, b, x in [(0.5, 0.5, 0.3), (2, 3, 0.9), (10, 0.5, 0.99)]:
        assert abs(betainc(a, b, x) - scipy.special.betainc(a, b, x)) < 1e-12


@given(st.integers(1, 20).map(lambda h: 2 * h), st.floats(-20, 20))
@example(10, 1e-6)
def test_even_df_closed_form_route(df, t):
    assert abs(t_sf2(t, df) - t_sf2_even_df(t, df)) < 1e-10


@given(st.floats(1.0, 60.0), st.floats(-8, 8))
def test_density_quadrature_route(df, t):
    assert abs(t_sf2(t, df) - t_sf2_simpson(t, df, n=2000)) < 1e-8


samples = arrays(np.float64, st.integers(2, 12), elements=st.floats(-1e3, 1e3))


@given(samples, samples)
@example(np.zeros(2), np.full(7, 2.38657241e-135))
def test_welch_matches_scipy_and_is_antisymmetric(a, b):
    r = welch_t_test(a, b)
    s = welch_t_test(b, a)
    assert s.t == -r.t and s.p == r.p
    assert 0.0 <= r.p <= 1.0
    if np.var(a) > 1e-6 and np.var(b) > 1e-6:
        ref = scipy.stats.ttest_ind(a, b, equal_var=False)
        assert r.t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
        assert r.p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)


def test_pooled_matches_scipy(rng):
    a, b = rng.standard_normal(9), rng.standard_normal(14) + 0.5
    r = pooled_t_test(a, b)
    ref = scipy.stats.ttest_ind(a, b, equal_var=True)
    assert r.t == pytest.approx(ref.statistic) and r.p == pytest.approx(ref.pvalue)
    assert r.df == 21


def test_rank_examples(rng):
    labels = ["ASD"] * 10 + ["TD"] * 10
    X = rng.standard_normal((20, 36))
    X[:, 5] = np.r_[np.zeros(10), np.ones(10)] + rng.normal(0, 1e-3, 20)
    r = rank_features(_ds(X, labels))
    assert r.ranked_names[0] == FEATURE_NAMES[5] and len(r.selected) == 8
    full = rank_features(_ds(X, labels), k=36)
    assert sorted(full.order.tolist()) == list(range(36)) and len(full.selected) == 36
    with pytest.raises(ValueError):
        rank_features(_ds(X, ["ASD"] * 20))
    with pytest.raises(ValueError):
        rank_features(_ds(X, labels), k=0)


def test_rank_ties_keep_column_order():
    X = np.tile([[1.0], [2.0], [3.0], [4.0]], (1, 5))
    r = rank_features(_ds(X, ["ASD", "ASD", "TD", "TD"]), k=3)
    assert r.order.tolist() == [0, 1, 2, 3, 4]


@given(st.integers(0, 10 ** 6), st.floats(0.01, 100), st.floats(-100, 100))
def test_rank_affine_invariance(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((24, 10)) + np.linspace(0, 2, 10) * np.r_[np.zeros(12), np.ones(12)][:, None]
    labels = ["ASD"] * 12 + ["TD"] * 12
    a = rank_features(_ds(X, labels), k=5)
    Y = X.copy()
    Y[:, 3] = scale * Y[:, 3] + shift
    b = rank_features(_ds(Y, labels), k=5)
    assert np.allclose(np.abs(a.t), np.abs(b.t), rtol=1e-9)
    # order can only differ through numerical near-ties
    gaps = np.diff(np.sort(np.abs(a.t)))
    if gaps.min() > 1e-9:
        assert a.order.tolist() == b.order.tolist()


def test_rank_recovers_signal_attributes():
    hits = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((84, 36))
        X[:46, :8] += 1.0
        r = rank_features(_ds(X, ["ASD"] * 46 + ["TD"] * 38))
        hits.append(len(set(r.order[:8].tolist()) & set(range(8))))
    assert min(hits) >= 7


def _shift_for_p(base_a, base_b, target):
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if welch_t_test(base_a, base_b + mid).p > target:
            lo = mid
        else:
            hi = mid
    return lo, hi


def test_class_statistics_decisions(rng):
    a = rng.standard_normal(20)
    b = rng.standard_normal(20)
    b = b - b.mean() + a.mean()
    just_above, just_below = _shift_for_p(a, b, 0.05)
    cols = [b, b + just_above, b + just_below, b + 5.0]
    X = np.column_stack([np.r_[a, c] for c in cols])
    rows = class_statistics(_ds(X, ["ASD"] * 20 + ["TD"] * 20))
    assert [r.decision for r in rows] == ["Rejected", "Rejected", "Accepted", "Accepted"]
    for r in rows:
        assert (r.decision == "Accepted") == (r.p < 0.05)
    assert rows[1].p >= 0.05 > rows[2].p
    text = format_class_statistics(rows, ["ASD", "TD"])
    assert "ASD mean" in text and text.count("Accepted") == 2


def test_identical_distributions_all_rejected():
    col = np.arange(10.0)
    X = np.column_stack([np.r_[col, col]] * 4)
    rows = class_statistics(_ds(X, ["ASD"] * 10 + ["TD"] * 10))
    assert all(r.decision == "Rejected" and r.p == 1.0 for r in rows)
