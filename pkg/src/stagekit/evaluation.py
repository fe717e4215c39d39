"""Classification metrics, Brier score, expected-class severity and the
repeated stratified cross-validation harness."""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .cohort import STAGE_NAMES, Cohort, FoldPlan
from .ranktests import kruskal_wallis
from .registry import ModelSpec, param_hash

logger = logging.getLogger(__name__)

SEVERITY_REFERENCE_LINES = (0.5, 1.5)


def confusion_matrix(true, predicted, n_classes: int = 3) -> np.ndarray:
    """k x k counts, rows = true class, columns = predicted class."""
    t = np.asarray(true, dtype=int)
    p = np.asarray(predicted, dtype=int)
    if t.shape != p.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("true and predicted must be equal-length, non-empty label vectors")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (t - 1, p - 1), 1)
    return cm


def _ratio(num, den):
    return np.divide(num, den, out=np.zeros(np.shape(num), dtype=float), where=den > 0)


@dataclass
class EvalReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f_measure: np.ndarray
    confusion: np.ndarray
    brier: float | None = None
    severity: np.ndarray | None = None
    misclassified: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    true: np.ndarray | None = None
    predicted: np.ndarray | None = None
    rows: np.ndarray | None = None  # data row of each true/predicted entry; None = identity

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def mean_f(self) -> float:
        return float(np.mean(self.f_measure))

    def one_vs_rest(self) -> np.ndarray:
        """k x 4 array of (TP, TN, FP, FN) per class."""
        cm = self.confusion
        tp = np.diag(cm)
        fp = cm.sum(axis=0) - tp
        fn = cm.sum(axis=1) - tp
        tn = cm.sum() - tp - fp - fn
        return np.column_stack([tp, tn, fp, fn])

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "accuracy": float(self.accuracy),
            "precision": np.asarray(self.precision, dtype=float).tolist(),
            "recall": np.asarray(self.recall, dtype=float).tolist(),
            "f_measure": np.asarray(self.f_measure, dtype=float).tolist(),
            "mean_f": self.mean_f,
            "confusion": np.asarray(self.confusion).tolist(),
            "brier": None if self.brier is None else float(self.brier),
            "misclassified": np.asarray(self.misclassified, dtype=int).tolist(),
        }


def confusion_and_metrics(true, predicted, n_classes: int = 3) -> EvalReport:
    """Accuracy plus one-vs-rest precision, recall and F-measure per class.

    Precision or recall with a zero denominator is 0, and F is 0 whenever
    precision + recall is 0.
    """
    t = np.asarray(true, dtype=int)
    p = np.asarray(predicted, dtype=int)
    cm = confusion_matrix(t, p, n_classes)
    tp = np.diag(cm).astype(float)
    precision = _ratio(tp, cm.sum(axis=0).astype(float))
    recall = _ratio(tp, cm.sum(axis=1).astype(float))
    f = _ratio(2 * precision * recall, precision + recall)
    return EvalReport(
        accuracy=float(np.trace(cm) / cm.sum()),
        precision=precision,
        recall=recall,
        f_measure=f,
        confusion=cm,
        misclassified=np.flatnonzero(t != p),
        true=t,
        predicted=p,
    )


def brier_score(true, probs) -> float:
    """(1 / (n k)) sum_i sum_j (onehot_ij - probs_ij)^2."""
    P = np.atleast_2d(np.asarray(probs, dtype=float))
    t = np.asarray(true, dtype=int)
    n, k = P.shape
    if t.shape != (n,):
        raise ValueError("one label per probability row required")
    if np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probability rows must sum to 1 (tolerance 1e-6)")
    Y = np.zeros_like(P)
    Y[np.arange(n), t - 1] = 1.0
    return float(np.sum((Y - P) ** 2) / (n * k))


def severity(probs) -> np.ndarray | float:
    """Expected class index minus one, sum_j (j - 1) p_j."""
    P = np.asarray(probs, dtype=float)
    w = np.arange(P.shape[-1], dtype=float)
    if P.ndim == 1:
        if abs(P.sum() - 1.0) > 1e-6:
            raise ValueError("probabilities must sum to 1")
        return float(P @ w)
    return P @ w


# ------------------------------------------------------------ cross-validation


def fold_seed(seed: int, repeat: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, repeat, fold]).generate_state(1)[0])


def screen_columns(X, y, alpha) -> np.ndarray:
    """Columns whose Kruskal-Wallis p-value against ``y`` is below alpha.
    Raises ValueError when none pass: there is nothing to fit on."""
    keep = [j for j in range(X.shape[1]) if kruskal_wallis(X[:, j], y).p_value < alpha]
    if not keep:
        raise ValueError(f"no feature passes screening at alpha={alpha}")
    return np.array(keep, dtype=int)


def _fit_fold(spec, X, y, train, test, seed, screen_alpha=None):
    cols = np.arange(X.shape[1])
    if screen_alpha is not None:
        cols = screen_columns(X[train], y[train], screen_alpha)
    Xtr, Xte = X[np.ix_(train, cols)], X[np.ix_(test, cols)]
    model = spec.fit(Xtr, y[train], seed=seed)
    pred = model.predict(Xte)
    proba = None
    if spec.probabilistic:
        proba = model.predict_proba(Xte)
    return pred, proba, param_hash(model)


def _task(args):
    spec, X, y, repeat, fold, train, test, seed, screen_alpha = args
    pred, proba, h = _fit_fold(spec, X, y, train, test, fold_seed(seed, repeat, fold),
                               screen_alpha)
    return repeat, fold, pred, proba, h


@dataclass
class CVResult:
    aggregate: dict
    repeats: list
    folds: list  # per (repeat, fold): param hash or exclusion flag
    spec: dict

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "aggregate": self.aggregate,
            "repeats": [r.to_dict() for r in self.repeats],
            "folds": self.folds,
        }


def _report(y, pred, proba, evaluated, n_classes=3):
    rep = confusion_and_metrics(y[evaluated], pred[evaluated], n_classes)
    rep.misclassified = evaluated[rep.misclassified]
    rep.rows = evaluated
    if proba is not None:
        P = proba[evaluated]
        rep.brier = brier_score(y[evaluated], P)
        rep.severity = severity(P)
    return rep


def aggregate_reports(reports) -> dict:
    """Unweighted mean over repeats of every metric; confusion counts are summed."""
    out = {
        "accuracy": float(np.mean([r.accuracy for r in reports])),
        "precision": np.mean([r.precision for r in reports], axis=0).tolist(),
        "recall": np.mean([r.recall for r in reports], axis=0).tolist(),
        "f_measure": np.mean([r.f_measure for r in reports], axis=0).tolist(),
        "confusion": np.sum([r.confusion for r in reports], axis=0).tolist(),
        "n_repeats": len(reports),
    }
    out["mean_f"] = float(np.mean(out["f_measure"]))
    briers = [r.brier for r in reports if r.brier is not None]
    out["brier"] = float(np.mean(briers)) if len(briers) == len(reports) else None
    return out


def cross_validate(data, spec: ModelSpec, plan: FoldPlan, seed: int = 0, workers: int = 1,
                   screen_alpha: float | None = None, n_classes: int = 3) -> CVResult:
    """Train on F-1 folds and predict the held-out fold, for every fold of
    every repeat. Predictions are pooled within a repeat before scoring; the
    aggregate is the unweighted mean over repeats.

    ``data`` is a Cohort or an (X, y) pair. A fold whose training part lacks
    a class is skipped with a warning and its rows are left unevaluated. Each
    fold fit gets a seed derived from (seed, repeat, fold), so the result does
    not depend on ``workers``. With ``screen_alpha`` set, feature screening
    runs on each training split only.
    """
    if isinstance(data, Cohort):
        X, y = np.asarray(data.features, dtype=float), np.asarray(data.stage_labels, dtype=int)
    else:
        X, y = (np.asarray(a) for a in data)
        X, y = X.astype(float), y.astype(int)
    if plan.assignments.shape[1] != y.size:
        raise ValueError("fold plan does not match the data size")
    present = np.unique(y)
    tasks, folds = [], []
    for r in range(plan.repeats):
        for fold, train, test in plan.splits(r):
            if np.setdiff1d(present, np.unique(y[train])).size:
                warnings.warn(f"repeat {r} fold {fold}: training split lacks a class; fold excluded",
                              stacklevel=2)
                folds.append({"repeat": r, "fold": fold, "excluded": True, "param_hash": None})
                continue
            tasks.append((spec, X, y, r, fold, train, test, seed, screen_alpha))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda res: (res[0], res[1]))

    reports = []
    for r in range(plan.repeats):
        pred = np.zeros(y.size, dtype=int)
        proba = np.full((y.size, n_classes), np.nan) if spec.probabilistic else None
        done = np.zeros(y.size, dtype=bool)
        for rep, fold, p, pr, h in results:
            if rep != r:
                continue
            test = plan.assignments[r] == fold
            pred[test] = p
            if proba is not None:
                proba[test] = pr
            done[test] = True
            folds.append({"repeat": r, "fold": int(fold), "excluded": False, "param_hash": h})
        evaluated = np.flatnonzero(done)
        if evaluated.size == 0:
            raise RuntimeError(f"repeat {r}: every fold was excluded")
        reports.append(_report(y, pred, proba, evaluated, n_classes))
    folds.sort(key=lambda f: (f["repeat"], f["fold"]))
    return CVResult(aggregate_reports(reports), reports, folds, spec.to_dict())


def error_analysis(report: EvalReport, cohort: Cohort) -> pd.DataFrame:
    """Per off-diagonal (true, predicted) cell: error count and the min,
    median and max of the misclassified rows' total scores."""
    cols = ["true", "predicted", "count", "min_total", "median_total", "max_total"]
    idx = np.asarray(report.misclassified, dtype=int)
    if idx.size == 0:
        return pd.DataFrame(columns=cols)
    totals = cohort.totals()[idx]
    t = np.asarray(cohort.stage_labels)[idx]
    pos = idx if report.rows is None else np.searchsorted(report.rows, idx)
    p = report.predicted[pos]
    rows = []
    for a in np.unique(t):
        for b in np.unique(p[t == a]):
            sel = (t == a) & (p == b)
            v = totals[sel]
            rows.append([STAGE_NAMES[a], STAGE_NAMES[b], int(sel.sum()),
                         float(v.min()), float(np.median(v)), float(v.max())])
    return pd.DataFrame(rows, columns=cols)

