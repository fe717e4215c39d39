import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import exact_kw_p, exact_ranksum_p, kw_h, pearson_of_midranks
from stagekit.cohort import Cohort, GeneratorSpec, generate_synthetic
from stagekit.ranktests import EXACT_MAX_N, kruskal_wallis, screen_features, spearman, wilcoxon_rank_sum

small_ints = st.lists(st.integers(0, 4), min_size=4, max_size=30)


@given(small_ints, st.integers(0, 2**31 - 1))
def test_kw_statistic_matches_textbook(values, seed):
    groups = np.random.default_rng(seed).integers(1, 4, len(values))
    if np.unique(groups).size < 2:
        return
    got = kruskal_wallis(values, groups)
    assert got.statistic == pytest.approx(max(kw_h(values, groups.tolist()), 0.0), abs=1e-9)
    assert 0.0 <= got.p_value <= 1.0


@given(small_ints, st.integers(0, 2**31 - 1))
def test_kw_matches_scipy(values, seed):
    groups = np.random.default_rng(seed).integers(1, 4, len(values))
    v = np.asarray(values)
    if np.unique(groups).size < 2 or np.unique(v).size < 2:
        return
    ref = stats.kruskal(*[v[groups == g] for g in np.unique(groups)])
    got = kruskal_wallis(v, groups)
    assert got.statistic == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    if v.size > EXACT_MAX_N:
        assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)


@given(st.lists(st.integers(0, 4), min_size=3, max_size=7), st.integers(0, 2**31 - 1))
def test_small_samples_are_exact(values, seed):
    r = np.random.default_rng(seed)
    groups = r.integers(1, 4, len(values))
    if np.unique(groups).size >= 2:
        assert kruskal_wallis(values, groups).p_value == pytest.approx(
            exact_kw_p(values, groups.tolist()), abs=1e-12)
    cut = int(r.integers(1, len(values)))
    assert wilcoxon_rank_sum(values[:cut], values[cut:]).p_value == pytest.approx(
        exact_ranksum_p(values[:cut], values[cut:]), abs=1e-12)


def test_kw_all_tied_is_null():
    r = kruskal_wallis([2, 2, 2, 2], [1, 1, 2, 2])
    assert (r.statistic, r.p_value) == (0.0, 1.0)


def test_kw_needs_two_groups():
    with pytest.raises(ValueError):
        kruskal_wallis([1, 2, 3], [1, 1, 1])


@given(st.lists(st.integers(0, 4), min_size=6, max_size=15),
       st.lists(st.integers(0, 4), min_size=6, max_size=15))
def test_ranksum_matches_scipy_continuity(a, b):
    if np.unique(a + b).size < 2 or len(a + b) <= EXACT_MAX_N:
        return
    ref = stats.mannwhitneyu(a, b, use_continuity=True, alternative="two-sided", method="asymptotic")
    got = wilcoxon_rank_sum(a, b)
    assert got.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)


@given(st.lists(st.integers(0, 4), min_size=2, max_size=12),
       st.lists(st.integers(0, 4), min_size=2, max_size=12))
def test_ranksum_antisymmetric(a, b):
    ab, ba = wilcoxon_rank_sum(a, b), wilcoxon_rank_sum(b, a)
    assert ab.statistic == pytest.approx(-ba.statistic, abs=1e-12)
    assert ab.p_value == pytest.approx(ba.p_value, abs=1e-12)


def test_ranksum_direction():
    assert wilcoxon_rank_sum([0, 0, 1], [3, 4, 4]).statistic < 0


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=30))
def test_spearman_matches_midrank_pearson(pairs):
    x, y = map(np.array, zip(*pairs))
    if np.unique(x).size < 2 or np.unique(y).size < 2:
        with pytest.raises(ValueError):
            spearman(x, y)
        return
    assert spearman(x, y) == pytest.approx(pearson_of_midranks(x, y), abs=1e-12)


def test_spearman_monotone_is_one():
    x = np.arange(10)
    assert spearman(x, x**3) == pytest.approx(1.0)
    assert spearman(x, -x) == pytest.approx(-1.0)


def test_screen_keeps_signal_columns():
    c = generate_synthetic(GeneratorSpec(n=400, seed=0))
    res = screen_features(c, alpha=0.05)
    assert len(res.selected) > 0
    table = res.table()
    assert list(table.columns) == ["feature", "chi_sq", "p_value", "selected"]
    assert table["selected"].sum() == len(res.selected)
    grp = screen_features(c, alpha=0.05, mode="group").table()
    assert "z_stat" in grp.columns


def test_screen_alpha_one_keeps_everything():
    X = np.zeros((6, 2))
    c = Cohort(X, np.array([1, 2, 3, 1, 2, 3]), ("a", "b"))
    assert screen_features(c, alpha=1.0).selected == [0, 1]
    with pytest.raises(ValueError):
        screen_features(c, alpha=0.0)


def test_kw_two_groups_agrees_with_ranksum_decision():
    r = np.random.default_rng(0)
    for _ in range(100):
        n = int(r.integers(12, 40))
        v = r.permutation(n).astype(float)  # tie-free
        g = np.repeat([1, 2], [n // 2, n - n // 2])
        shift = r.uniform(0, 1) * (g == 2) * n
        kw = kruskal_wallis(v + shift, g).p_value < 0.05
        rs = wilcoxon_rank_sum((v + shift)[g == 1], (v + shift)[g == 2]).p_value < 0.05
        assert kw == rs
