import numpy as np
import pytest

from stagekit.cohort import Cohort, GeneratorSpec, generate_synthetic
from stagekit.ensembles import fit_forest
from stagekit.importance import (
    HC, PD, fit_group_forest, oob_importance, prevalence_difference, rank_scores,
    two_class_labels,
)


def planted(seed, n=200, m=6):
    r = np.random.default_rng(seed)
    X = r.integers(0, 5, (n, m)).astype(float)
    y = np.where(X[:, 0] >= 2, PD, HC)
    return X, y


def test_rank_scores_ties_keep_order():
    assert rank_scores([0.1, 0.3, 0.3, -0.2]).tolist() == [3, 1, 2, 4]


def test_planted_feature_ranks_first():
    X, y = planted(0)
    f = fit_forest(X, y, n_trees=30, seed=0, n_classes=2)
    rep = oob_importance(X, y, f, seed=0)
    assert rep.ranks[0] == 1
    assert rep.table().iloc[0]["feature"] == "x0"
    assert rep.oob_accuracy > 0.9
    assert rep.confusion.sum() <= y.size and rep.trees_used == 30


def test_unused_features_score_zero():
    X, y = planted(1, m=3)
    X = np.column_stack([X, np.zeros(y.size)])  # constant column never splits
    f = fit_forest(X, y, n_trees=10, seed=0, n_classes=2)
    assert oob_importance(X, y, f).scores[3] == 0.0


def test_importance_deterministic():
    X, y = planted(2)
    f = fit_forest(X, y, n_trees=10, seed=0, n_classes=2)
    a, b = oob_importance(X, y, f, seed=4), oob_importance(X, y, f, seed=4)
    assert np.array_equal(a.scores, b.scores)
    assert a.to_dict()["confusion"]["labels"] == ["PD", "HC"]


def test_importance_on_cohort():
    c = generate_synthetic(GeneratorSpec(n=200, seed=0))
    f = fit_group_forest(c, n_trees=10, seed=0)
    rep = oob_importance(c, None, f)
    assert rep.feature_names == c.feature_names
    assert 0 <= rep.sensitivity <= 1 and 0 <= rep.specificity <= 1
    with pytest.raises(ValueError):
        oob_importance(c.features[:10], two_class_labels(c)[:10], f)


def test_two_class_labels_requires_groups():
    c = Cohort(np.zeros((3, 1)), np.array([1, 2, 3]), ("a",))
    with pytest.raises(ValueError):
        two_class_labels(c)


def test_prevalence_difference_hand_values():
    X = np.array([[0, 1], [1, 0], [2, 2], [0, 3]], dtype=float)
    c = Cohort(X, np.array([1, 1, 2, 3]), ("a", "b"), np.array(["HC", "HC", "PD", "PD"], object))
    tab = prevalence_difference(c)
    assert tab["pd_percent"].tolist() == [50.0, 100.0]
    assert tab["hc_percent"].tolist() == [50.0, 50.0]
    assert tab["difference"].tolist() == [0.0, 50.0]
