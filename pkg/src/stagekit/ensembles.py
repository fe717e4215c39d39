"""Tree ensembles: cost-biased AdaBoost.M2, RUSBoost and random forests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .models.tree import TreeModel, fit_tree

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-10
MAX_CONSECUTIVE_RESETS = 5


def _check_vector(values, n_classes, what):
    v = np.asarray(values, dtype=float)
    if v.shape != (n_classes,) or np.any(~(v > 0)):
        raise ValueError(f"{what} must be {n_classes} positive numbers")
    return v


@dataclass(eq=False)
class BoostEnsemble:
    """Weak trees with their pseudo-loss weights.

    The hypothesis is argmax_y sum_t log(1/beta_t) h_t(x, y). ``trace`` keeps
    one record per boosting round, including discarded ones.
    """

    learners: list
    betas: np.ndarray
    n_classes: int = 3
    kind: str = "adaboost"
    trace: list = field(default_factory=list)

    @property
    def mislabel_set_size(self) -> int:
        return self.trace[0]["n"] * (self.n_classes - 1) if self.trace else 0

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        total = np.zeros((X.shape[0], self.n_classes))
        for tree, beta in zip(self.learners, self.betas):
            total += np.log(1.0 / beta) * tree.predict_proba(X)
        return total

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1) + 1

    def predict_proba(self, X) -> np.ndarray:
        """Scores divided by the total vote weight: a convex combination of
        the learners' confidence vectors."""
        return self.scores(X) / np.sum(np.log(1.0 / self.betas))


def predict_boost(ensemble: BoostEnsemble, x):
    if not ensemble.learners:
        raise ValueError("empty ensemble")
    s = ensemble.scores(np.asarray(x, dtype=float)[None, :])[0]
    return int(np.argmax(s)) + 1, s


def pseudo_loss(D, h, y) -> float:
    """Half the D-weighted sum over mislabels of (1 - h(x_i, y_i) + h(x_i, y))."""
    h_true = h[np.arange(y.size), y - 1]
    return 0.5 * float(np.sum(D * (1.0 - h_true[:, None] + h)))


def update_distribution(D, h, y, beta) -> np.ndarray:
    """Multiply by beta^(1/2 (1 + h(x_i, y_i) - h(x_i, y))) and renormalise."""
    h_true = h[np.arange(y.size), y - 1]
    out = D * np.power(beta, 0.5 * (1.0 + h_true[:, None] - h))
    out[np.arange(y.size), y - 1] = 0.0
    return out / out.sum()


def _boost(X, y, D0, n_rounds, fit_round, n_classes, kind, keep=False):
    n = y.size
    D = D0.copy()
    learners, betas, trace = [], [], []
    resets = 0
    for t in range(n_rounds):
        tree = fit_round(t, D)
        h = tree.predict_proba(X)
        e = pseudo_loss(D, h, y)
        record = {"round": t + 1, "n": n, "pseudo_loss": e}
        if keep:
            record["distribution"] = D.copy()
        if e >= 0.5:
            resets += 1
            D = D0.copy()
            record.update(retained=False, beta=None, reset=True, d_sum=float(D.sum()))
            trace.append(record)
            if resets >= MAX_CONSECUTIVE_RESETS:
                logger.info("%s stopped after %d consecutive discarded rounds", kind, resets)
                break
            continue
        resets = 0
        if e <= 0.0:
            learners.append(tree)
            betas.append(BETA_FLOOR)
            record.update(retained=True, beta=BETA_FLOOR, reset=False, d_sum=float(D.sum()))
            trace.append(record)
            break
        beta = e / (1.0 - e)
        D = update_distribution(D, h, y, beta)
        learners.append(tree)
        betas.append(beta)
        record.update(retained=True, beta=beta, reset=False, d_sum=float(D.sum()))
        if keep:
            record["updated"] = D.copy()
        trace.append(record)
    if not learners:
        raise RuntimeError(f"{kind}: no weak learner reached pseudo-loss below 0.5")
    return BoostEnsemble(learners, np.array(betas), n_classes, kind, trace)


def _initial_distribution(y, n_classes, costs=None):
    n = y.size
    D = np.ones((n, n_classes))
    D[np.arange(n), y - 1] = 0.0
    if costs is not None:
        D *= costs[y - 1][:, None]
    return D / D.sum()


def fit_adaboost_m2(
    X,
    y,
    costs=None,
    n_rounds: int = 100,
    seed: int = 0,
    min_leaf: int = 1,
    max_depth: int | None = 3,
    n_classes: int = 3,
    keep_distributions: bool = False,
) -> BoostEnsemble:
    """AdaBoost.M2 over CART trees.

    Class costs bias the starting distribution: every mislabel pair (i, y)
    starts at weight proportional to the cost of observation i's true class.
    Each round fits a tree on the per-observation mislabel mass. A round with
    pseudo-loss >= 0.5 is discarded and the distribution restarts (at most 5
    times in a row); pseudo-loss 0 keeps the tree with beta = 1e-10 and stops.
    ``seed`` is accepted for interface symmetry; the procedure is
    deterministic. ``keep_distributions`` stores the weight matrix used in
    each round (and the updated one) on the trace, for auditing.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if n_rounds < 1:
        raise ValueError("need at least one boosting round")
    if np.unique(y).size < 2:
        raise ValueError("boosting needs at least two classes in the training data")
    c = None if costs is None else _check_vector(costs, n_classes, "class costs")
    D0 = _initial_distribution(y, n_classes, c)

    def fit_round(t, D):
        return fit_tree(X, y, D.sum(axis=1), min_leaf=min_leaf, max_depth=max_depth,
                        n_classes=n_classes)

    return _boost(X, y, D0, n_rounds, fit_round, n_classes, "adaboost", keep_distributions)


def rus_targets(y, proportions, n_classes: int = 3) -> np.ndarray:
    """Per-class sample sizes: round(p_c * minority count), at least 1."""
    counts = np.bincount(y, minlength=n_classes + 1)[1:]
    minority = counts[counts > 0].min()
    p = _check_vector(proportions, n_classes, "sampling proportions")
    targets = np.maximum(1, np.rint(p * minority).astype(int))
    return np.where(counts > 0, targets, 0)


def rus_sample(y, targets, rng) -> np.ndarray:
    """Draw class c to size targets[c]; with replacement only when the class
    is smaller than its target."""
    parts = []
    for c, size in enumerate(targets, start=1):
        members = np.flatnonzero(y == c)
        if size == 0 or members.size == 0:
            continue
        parts.append(rng.choice(members, size=size, replace=size > members.size))
    return np.concatenate(parts)


def fit_rusboost(
    X,
    y,
    proportions=(1.0, 1.0, 1.0),
    n_rounds: int = 50,
    seed: int = 0,
    min_leaf: int = 1,
    max_depth: int | None = 3,
    n_classes: int = 3,
    keep_distributions: bool = False,
) -> BoostEnsemble:
    """RUSBoost: every round trains on a randomly resized copy of the data
    (class c drawn to round(p_c * minority count) rows), while pseudo-loss,
    beta and the weight update use the full training set. Duplicated rows keep
    copies of their weight before renormalisation."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if n_rounds < 1:
        raise ValueError("need at least one boosting round")
    if np.unique(y).size < 2:
        raise ValueError("boosting needs at least two classes in the training data")
    targets = rus_targets(y, proportions, n_classes)
    rng = np.random.default_rng(seed)
    D0 = _initial_distribution(y, n_classes)
    samples = []

    def fit_round(t, D):
        idx = rus_sample(y, targets, rng)
        samples.append(idx)
        w = D.sum(axis=1)[idx]
        return fit_tree(X[idx], y[idx], w / w.sum(), min_leaf=min_leaf, max_depth=max_depth,
                        n_classes=n_classes)

    ens = _boost(X, y, D0, n_rounds, fit_round, n_classes, "rusboost", keep_distributions)
    for record, idx in zip(ens.trace, samples):
        record["sample_counts"] = np.bincount(y[idx], minlength=n_classes + 1)[1:].tolist()
    return ens


# ----------------------------------------------------------------- forests


@dataclass(eq=False)
class ForestModel:
    trees: list
    bootstrap_indices: np.ndarray
    max_features: int
    seed: int = 0
    n_classes: int = 3

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def oob_masks(self) -> np.ndarray:
        """T x n boolean: row i is out-of-bag for tree t."""
        n = self.bootstrap_indices.shape[1]
        masks = np.ones((self.n_trees, n), dtype=bool)
        for t, boot in enumerate(self.bootstrap_indices):
            masks[t, boot] = False
        return masks

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return sum(tree.predict_proba(X) for tree in self.trees) / self.n_trees

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def oob_proba(self, X) -> np.ndarray:
        """Average confidence over the trees for which each training row is
        out-of-bag; NaN rows were in every bootstrap."""
        X = np.asarray(X, dtype=float)
        masks = self.oob_masks
        total = np.zeros((X.shape[0], self.n_classes))
        hits = masks.sum(axis=0)
        for tree, mask in zip(self.trees, masks):
            if mask.any():
                total[mask] += tree.predict_proba(X[mask])
        with np.errstate(invalid="ignore"):
            return total / hits[:, None]


def predict_forest(model: ForestModel, x):
    p = model.predict_proba(np.asarray(x, dtype=float)[None, :])[0]
    return int(np.argmax(p)) + 1, p


def default_max_features(m: int) -> int:
    return max(1, int(round(np.sqrt(m))))


def fit_forest(
    X,
    y,
    costs=None,
    n_trees: int = 100,
    min_leaf: int = 1,
    seed: int = 0,
    max_features: int | None = None,
    n_classes: int = 3,
) -> ForestModel:
    """Random forest: tree t sees a bootstrap of n rows (with replacement)
    drawn from its own stream spawned off ``seed``, and every split looks at
    a fresh subset of round(sqrt(m)) features. Class costs become per-row
    weights."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if n_trees < 1:
        raise ValueError("need at least one tree")
    n, m = X.shape
    mf = default_max_features(m) if max_features is None else int(max_features)
    c = np.ones(n_classes) if costs is None else _check_vector(costs, n_classes, "class costs")
    w = c[y - 1]
    trees, boots = [], np.empty((n_trees, n), dtype=int)
    for t, child in enumerate(np.random.SeedSequence(seed).spawn(n_trees)):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        boots[t] = boot
        trees.append(fit_tree(X[boot], y[boot], w[boot], min_leaf=min_leaf,
                              max_features=mf, rng=rng, n_classes=n_classes))
    return ForestModel(trees, boots, mf, seed, n_classes)


__all__ = [
    "BoostEnsemble", "ForestModel", "TreeModel", "fit_adaboost_m2", "fit_forest",
    "fit_rusboost", "predict_boost", "predict_forest", "pseudo_loss", "rus_sample",
    "rus_targets", "update_distribution",
]
