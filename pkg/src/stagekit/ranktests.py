"""Rank-based screening statistics: Kruskal-Wallis, Wilcoxon rank-sum, Spearman.

Ties get mid-ranks and the usual tie correction. P-values are the large-sample
chi-square / normal approximations, except for tiny samples (n <= EXACT_MAX_N)
where the approximation is poor and the exact permutation p-value over every
distinct group assignment is cheap to enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from .cohort import Cohort

EXACT_MAX_N = 10
_REL_TOL = 1e-9


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_used: int

    __test__ = False  # not a pytest class


def _tie_term(values: np.ndarray) -> float:
    _, t = np.unique(values, return_counts=True)
    return float(np.sum(t**3 - t))


def _splits(pool, sizes):
    """Every distinct way to deal ``pool`` into groups of the given sizes."""
    if len(sizes) == 1:
        yield (pool,)
        return
    for first in combinations(pool, sizes[0]):
        rest = tuple(i for i in pool if i not in first)
        for tail in _splits(rest, sizes[1:]):
            yield (first, *tail)


def _exact_kw_p(ranks, sizes) -> float:
    """P(sum_g R_g^2 / n_g >= observed) over all group assignments; the
    observed grouping is the first ``sizes[0]`` ranks, then the next, etc."""
    bounds = np.cumsum((0, *sizes))
    obs = sum(ranks[a:b].sum() ** 2 / (b - a) for a, b in zip(bounds[:-1], bounds[1:]))
    stats_ = np.array([sum(ranks[list(g)].sum() ** 2 / len(g) for g in split)
                       for split in _splits(tuple(range(ranks.size)), tuple(sizes))])
    return float(np.mean(stats_ >= obs * (1 - _REL_TOL)))


def _exact_ranksum_p(ranks, na) -> float:
    mean = na * (ranks.size + 1) / 2.0
    obs = abs(ranks[:na].sum() - mean)
    dev = np.array([abs(ranks[list(c)].sum() - mean) for c in combinations(range(ranks.size), na)])
    return float(np.mean(dev >= obs - _REL_TOL * max(obs, 1.0)))


def kruskal_wallis(values, groups) -> TestResult:
    """H statistic with tie correction; p from chi-square with k-1 df, or the
    exact permutation p-value when n <= EXACT_MAX_N."""
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    if values.shape != groups.shape:
        raise ValueError("values and groups must have the same length")
    levels = np.unique(groups)
    if levels.size < 2:
        raise ValueError("Kruskal-Wallis needs at least 2 groups")
    n = values.size
    ranks = stats.rankdata(values)
    h = sum(ranks[groups == g].sum() ** 2 / np.sum(groups == g) for g in levels)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    correction = 1.0 - _tie_term(values) / (n**3 - n)
    if correction <= 0:
        return TestResult(0.0, 1.0, n)
    h = max(h / correction, 0.0)
    if n <= EXACT_MAX_N:
        order = np.concatenate([np.flatnonzero(groups == g) for g in levels])
        sizes = [int(np.sum(groups == g)) for g in levels]
        return TestResult(float(h), _exact_kw_p(ranks[order], sizes), n)
    return TestResult(float(h), float(stats.chi2.sf(h, levels.size - 1)), n)


def wilcoxon_rank_sum(a, b) -> TestResult:
    """Normal-approximation rank-sum test on sample ``a`` vs ``b``.

    z is (W - E[W] -/+ 0.5) / sd(W) with W the rank sum of ``a``; negative z
    means ``a`` tends to be smaller. With n <= EXACT_MAX_N the p-value is the
    exact two-sided permutation probability of |W - E[W]| instead.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size < 1 or b.size < 1:
        raise ValueError("both samples need at least one value")
    x = np.concatenate([a, b])
    n, na, nb = x.size, a.size, b.size
    ranks = stats.rankdata(x)
    w = ranks[:na].sum()
    mean = na * (n + 1) / 2.0
    var = na * nb / 12.0 * ((n + 1) - _tie_term(x) / (n * (n - 1)))
    if var <= 0:
        return TestResult(0.0, 1.0, n)
    diff = w - mean
    z = (diff - 0.5 * np.sign(diff)) / np.sqrt(var)
    if np.sign(z) != np.sign(diff):  # correction overshoots when |diff| < 0.5
        z = 0.0
    p = min(1.0, 2.0 * stats.norm.sf(abs(z)))
    if n <= EXACT_MAX_N:
        p = _exact_ranksum_p(ranks, na)
    return TestResult(float(z), float(p), n)


def spearman(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("spearman needs two equal-length inputs of size >= 2")
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))
    if denom == 0:
        raise ValueError("spearman correlation undefined for a constant input")
    return float(np.clip(np.dot(rx, ry) / denom, -1.0, 1.0))


@dataclass
class ScreenResult:
    selected: list[int]
    results: list[TestResult]
    feature_names: tuple[str, ...]
    test: str
    alpha: float

    def table(self):
        import pandas as pd

        col = "chi_sq" if self.test == "kruskal" else "z_stat"
        return pd.DataFrame(
            {
                "feature": self.feature_names,
                col: [r.statistic for r in self.results],
                "p_value": [r.p_value for r in self.results],
                "selected": [j in set(self.selected) for j in range(len(self.results))],
            }
        )


def screen_features(cohort: Cohort, alpha: float = 0.05, mode: str = "stage") -> ScreenResult:
    """Keep features with p < alpha.

    ``mode="stage"`` runs Kruskal-Wallis against the 3 stage labels;
    ``mode="group"`` runs the rank-sum test HC vs PD.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    X = cohort.features
    results = []
    if mode == "stage":
        for j in range(cohort.m):
            results.append(kruskal_wallis(X[:, j], cohort.stage_labels))
        test = "kruskal"
    elif mode == "group":
        if cohort.group_labels is None:
            raise ValueError("group screening needs HC/PD labels")
        pd_rows = cohort.group_labels == "PD"
        for j in range(cohort.m):
            results.append(wilcoxon_rank_sum(X[pd_rows, j], X[~pd_rows, j]))
        test = "ranksum"
    else:
        raise ValueError(f"unknown screening mode {mode!r}")
    selected = [j for j, r in enumerate(results) if r.p_value < alpha or alpha == 1.0]
    return ScreenResult(selected, results, cohort.feature_names, test, alpha)
