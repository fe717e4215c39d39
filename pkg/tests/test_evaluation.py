import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import brute_brier, brute_metrics
from stagekit.cohort import Cohort, GeneratorSpec, generate_synthetic, make_folds
from stagekit.evaluation import (
    brier_score, confusion_and_metrics, confusion_matrix, cross_validate, error_analysis,
    fold_seed, screen_columns, severity,
)
from stagekit.registry import ModelSpec

labels = st.lists(st.integers(1, 3), min_size=1, max_size=60)


@given(labels, st.integers(0, 2**31 - 1))
def test_metrics_match_brute_force(true, seed):
    pred = np.random.default_rng(seed).integers(1, 4, len(true))
    rep = confusion_and_metrics(true, pred)
    ref = brute_metrics(true, pred)
    assert rep.accuracy == ref["accuracy"]
    assert rep.precision.tolist() == ref["precision"]
    assert rep.recall.tolist() == ref["recall"]
    assert rep.f_measure.tolist() == ref["f"]
    assert rep.confusion.sum() == len(true)
    assert np.all(rep.one_vs_rest().sum(axis=1) == len(true))


@given(labels, st.integers(0, 2**31 - 1))
def test_brier_matches_brute_force_and_bounds(true, seed):
    P = np.random.default_rng(seed).dirichlet(np.ones(3), len(true))
    b = brier_score(true, P)
    assert b == pytest.approx(brute_brier(true, P.tolist()), abs=1e-12)
    assert 0 <= b <= 2 / 3


def test_brier_extremes_and_validation():
    y = np.array([1, 2, 3])
    assert brier_score(y, np.eye(3)) == 0.0
    assert brier_score(y, np.eye(3)[[1, 2, 0]]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        brier_score(y, np.full((3, 3), 0.5))


def test_confusion_rows_are_truth():
    cm = confusion_matrix([1, 1, 2], [2, 2, 2])
    assert cm[0, 1] == 2 and cm[1, 1] == 1
    with pytest.raises(ValueError):
        confusion_matrix([], [])


def test_zero_denominators_give_zero():
    rep = confusion_and_metrics([1, 1], [1, 1])
    assert rep.precision.tolist() == [1.0, 0.0, 0.0]
    assert rep.f_measure.tolist() == [1.0, 0.0, 0.0]


def test_severity():
    assert severity([0.2, 0.3, 0.5]) == pytest.approx(1.3)
    assert severity(np.eye(3)).tolist() == [0.0, 1.0, 2.0]
    with pytest.raises(ValueError):
        severity([0.5, 0.6, 0.1])


def test_fold_seed_distinct():
    seeds = {fold_seed(0, r, f) for r in range(5) for f in range(10)}
    assert len(seeds) == 50


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(GeneratorSpec(n=300, seed=0))


def test_cv_every_row_evaluated_once_per_repeat(small):
    plan = make_folds(small.stage_labels, folds=3, repeats=2, seed=1)
    res = cross_validate(small, ModelSpec("knn"), plan)
    assert len(res.repeats) == 2
    for rep in res.repeats:
        assert rep.n == small.n
        assert rep.brier is not None and rep.severity.shape == (small.n,)
    agg = res.aggregate
    assert agg["accuracy"] == pytest.approx(np.mean([r.accuracy for r in res.repeats]))
    assert np.sum(agg["confusion"]) == 2 * small.n
    assert len(res.folds) == 6 and all(not f["excluded"] for f in res.folds)


def test_cv_independent_of_workers(small):
    plan = make_folds(small.stage_labels, folds=3, repeats=1, seed=2)
    spec = ModelSpec("forest", {"n_trees": 5})
    a = cross_validate(small, spec, plan, seed=5, workers=1)
    b = cross_validate(small, spec, plan, seed=5, workers=2)
    assert a.to_dict() == b.to_dict()


def test_cv_svm_has_no_brier(small):
    plan = make_folds(small.stage_labels, folds=3, seed=0)
    res = cross_validate(small, ModelSpec("svm"), plan)
    assert res.aggregate["brier"] is None


def test_cv_excludes_fold_missing_a_class():
    X = np.arange(12.0)[:, None]
    y = np.array([1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3])
    plan = make_folds(y, folds=2, seed=0)
    # both stage-3 rows in one fold: the other fold trains without them
    a = plan.assignments.copy()
    a[0, y == 3] = 1
    plan = type(plan)(a, plan.folds, plan.seed)
    with pytest.warns(UserWarning):
        res = cross_validate((X, y), ModelSpec("knn", {"k_nn": 1}), plan)
    assert [f["excluded"] for f in res.folds] == [True, False]
    assert res.repeats[0].n == int(np.sum(a[0] == 2))


def test_cv_rejects_mismatched_plan(small):
    plan = make_folds(np.array([1, 2, 3] * 4), folds=2)
    with pytest.raises(ValueError):
        cross_validate(small, ModelSpec("knn"), plan)


def test_in_fold_screening(small):
    plan = make_folds(small.stage_labels, folds=3, seed=0)
    res = cross_validate(small, ModelSpec("knn"), plan, screen_alpha=0.05)
    assert res.aggregate["accuracy"] > 0.8
    with pytest.raises(ValueError):
        screen_columns(np.zeros((6, 2)), np.array([1, 2, 3] * 2), 0.05)


def test_error_analysis_table():
    X = np.array([[1.0, 1], [0, 0], [4, 4], [3, 3]])
    c = Cohort(X, np.array([1, 1, 3, 3]), ("a", "b"))
    rep = confusion_and_metrics(c.stage_labels, [2, 1, 2, 2])
    tab = error_analysis(rep, c)
    assert tab.to_dict("records") == [
        {"true": tab.iloc[0]["true"], "predicted": tab.iloc[0]["predicted"], "count": 1,
         "min_total": 2.0, "median_total": 2.0, "max_total": 2.0},
        {"true": tab.iloc[1]["true"], "predicted": tab.iloc[1]["predicted"], "count": 2,
         "min_total": 6.0, "median_total": 7.0, "max_total": 8.0},
    ]
    assert error_analysis(confusion_and_metrics([1], [1]), c).empty
