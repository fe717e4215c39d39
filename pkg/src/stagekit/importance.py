"""Healthy-control vs PD feature importance by out-of-bag permutation, and
the per-item severity prevalence difference between the two groups."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .cohort import Cohort
from .ensembles import ForestModel, fit_forest

logger = logging.getLogger(__name__)

HC, PD = 1, 2  # internal two-class codes


def two_class_labels(cohort: Cohort) -> np.ndarray:
    """1 for HC rows, 2 for PD rows."""
    if cohort.group_labels is None:
        raise ValueError("cohort has no HC/PD group labels")
    return np.where(np.asarray(cohort.group_labels) == "PD", PD, HC)


def fit_group_forest(cohort: Cohort, n_trees: int = 100, seed: int = 0, costs=None,
                     min_leaf: int = 1) -> ForestModel:
    return fit_forest(cohort.features, two_class_labels(cohort), costs=costs, n_trees=n_trees,
                      min_leaf=min_leaf, seed=seed, n_classes=2)


@dataclass
class ImportanceReport:
    feature_names: tuple
    scores: np.ndarray
    ranks: np.ndarray
    oob_accuracy: float
    sensitivity: float
    specificity: float
    confusion: np.ndarray  # rows true (PD, HC), columns predicted (PD, HC)
    trees_used: int

    def table(self) -> pd.DataFrame:
        df = pd.DataFrame({"feature": list(self.feature_names), "score": self.scores,
                           "rank": self.ranks})
        return df.sort_values("rank", kind="stable").reset_index(drop=True)

    def to_dict(self) -> dict:
        return {
            "features": list(self.feature_names),
            "scores": self.scores.tolist(),
            "ranks": self.ranks.tolist(),
            "oob_accuracy": self.oob_accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "confusion": {"labels": ["PD", "HC"], "matrix": self.confusion.tolist()},
            "trees_used": self.trees_used,
        }


def rank_scores(scores) -> np.ndarray:
    """Rank 1 = largest score; equal scores keep column order."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    ranks = np.empty(order.size, dtype=int)
    ranks[order] = np.arange(1, order.size + 1)
    return ranks


def oob_importance(X, y, forest: ForestModel, seed: int = 0, feature_names=None) -> ImportanceReport:
    """Mean over trees of the increase in a tree's out-of-bag error when one
    feature is permuted among that tree's out-of-bag rows.

    ``X``/``y`` must be the forest's training data (or a Cohort as ``X`` with
    ``y=None``, using HC/PD labels). Each tree gets its own permutation stream
    derived from (seed, tree index). Trees with no out-of-bag rows are skipped
    with a warning. The reported accuracy, sensitivity (PD detected) and
    specificity (HC kept) come from the out-of-bag vote.
    """
    if isinstance(X, Cohort):
        feature_names = feature_names or X.feature_names
        X, y = X.features, two_class_labels(X)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, m = X.shape
    if forest.bootstrap_indices.shape[1] != n:
        raise ValueError("forest was not trained on data of this size")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(m))
    masks = forest.oob_masks
    increase = np.zeros(m)
    used = 0
    for t, (tree, mask) in enumerate(zip(forest.trees, masks)):
        rows = np.flatnonzero(mask)
        if rows.size == 0:
            warnings.warn(f"tree {t} has no out-of-bag rows; skipped", stacklevel=2)
            continue
        used += 1
        rng = np.random.default_rng([seed, t])
        Xo, yo = X[rows], y[rows]
        base = np.mean(tree.predict(Xo) != yo)
        split_features = set(tree.feature[tree.feature >= 0].tolist())
        for j in range(m):
            perm = rng.permutation(rows.size)
            if j not in split_features:
                continue  # the tree never reads column j: no change
            Xp = Xo.copy()
            Xp[:, j] = Xo[perm, j]
            increase[j] += np.mean(tree.predict(Xp) != yo) - base
    scores = increase / used if used else increase

    proba = forest.oob_proba(X)
    covered = ~np.isnan(proba[:, 0])
    pred = np.argmax(proba[covered], axis=1) + 1
    truth = y[covered]
    cm = np.array([
        [np.sum((truth == PD) & (pred == PD)), np.sum((truth == PD) & (pred == HC))],
        [np.sum((truth == HC) & (pred == PD)), np.sum((truth == HC) & (pred == HC))],
    ])
    acc = float(np.trace(cm) / max(cm.sum(), 1))
    sens = float(cm[0, 0] / cm[0].sum()) if cm[0].sum() else 0.0
    spec = float(cm[1, 1] / cm[1].sum()) if cm[1].sum() else 0.0
    return ImportanceReport(names, scores, rank_scores(scores), acc, sens, spec, cm, used)


def prevalence_difference(cohort: Cohort) -> pd.DataFrame:
    """Per item: % of PD rows scoring above 0 minus % of HC rows scoring above 0."""
    labels = two_class_labels(cohort)
    X = cohort.features
    pd_rows, hc_rows = labels == PD, labels == HC
    pd_pct = 100.0 * (X[pd_rows] > 0).mean(axis=0) if pd_rows.any() else np.zeros(cohort.m)
    hc_pct = 100.0 * (X[hc_rows] > 0).mean(axis=0) if hc_rows.any() else np.zeros(cohort.m)
    return pd.DataFrame({
        "feature": list(cohort.feature_names),
        "pd_percent": pd_pct,
        "hc_percent": hc_pct,
        "difference": pd_pct - hc_pct,
    })
