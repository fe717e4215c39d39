"""Weighted-Gini CART classification tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class TreeModel:
    """Array-encoded binary tree.

    Node ``t`` is a leaf when ``feature[t] == -1``; otherwise rows with
    ``x[feature[t]] < threshold[t]`` go to ``left[t]`` and the rest to
    ``right[t]``. ``value[t]`` holds the weighted class frequencies at ``t``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    min_leaf: int = 1

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            t = node[r]
            go_left = X[r, self.feature[t]] < self.threshold[t]
            node[r] = np.where(go_left, self.left[t], self.right[t])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=int)
        for t in range(self.n_nodes):
            if self.feature[t] >= 0:
                d[self.left[t]] = d[self.right[t]] = d[t] + 1
        return int(d.max())


def predict_tree(model: TreeModel, x) -> np.ndarray:
    """Per-class confidence vector for a single observation."""
    return model.predict_proba(np.asarray(x, dtype=float)[None, :])[0]


def _best_split(Xn, wy, min_leaf):
    """Best (column, threshold) over the columns of ``Xn``, or None.

    ``wy`` is the s x k matrix of per-row class weights. The score is
    sum_c L_c^2/|L| + sum_c R_c^2/|R|, the quantity whose maximum minimises
    weighted Gini impurity of the children.
    """
    s = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    left = np.cumsum(wy[order], axis=0)[:-1]  # (s-1) x m x k
    right = wy.sum(axis=0) - left
    wl = left.sum(axis=2)
    wr = right.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(wl > 0, (left**2).sum(axis=2) / wl, 0.0)
        score += np.where(wr > 0, (right**2).sum(axis=2) / wr, 0.0)
    valid = xs[1:] > xs[:-1]
    pos = np.arange(1, s)
    valid &= ((pos >= min_leaf) & (s - pos >= min_leaf))[:, None]
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf).T  # m x (s-1): feature-major tie order
    flat = int(np.argmax(score))
    col, p = divmod(flat, s - 1)
    thr = 0.5 * (xs[p, col] + xs[p + 1, col])
    if not thr > xs[p, col]:  # adjacent floats; keep the strict-less rule exact
        thr = xs[p + 1, col]
    return col, thr


MAX_LEVELS = 64


def _best_split_levels(codes, wy, min_leaf, n_levels):
    """Histogram version of ``_best_split`` for small non-negative integer
    codes. Returns (column, level) meaning "left holds codes <= level"."""
    s, m = codes.shape
    k = wy.shape[1]
    flat = (codes + n_levels * np.arange(m)).ravel()
    hist = np.empty((m, n_levels, k))
    for c in range(k):
        hist[:, :, c] = np.bincount(flat, weights=np.repeat(wy[:, c], m),
                                    minlength=m * n_levels).reshape(m, n_levels)
    counts = np.bincount(flat, minlength=m * n_levels).reshape(m, n_levels)
    left = np.cumsum(hist, axis=1)[:, :-1]
    right = hist.sum(axis=1)[:, None, :] - left
    nl = np.cumsum(counts, axis=1)[:, :-1]
    wl = left.sum(axis=2)
    wr = right.sum(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(wl > 0, (left**2).sum(axis=2) / wl, 0.0)
        score += np.where(wr > 0, (right**2).sum(axis=2) / wr, 0.0)
    valid = (counts[:, :-1] > 0) & (nl >= min_leaf) & (s - nl >= min_leaf)
    if not valid.any():
        return None
    col, level = divmod(int(np.argmax(np.where(valid, score, -np.inf))), n_levels - 1)
    return col, level, counts[col]


def fit_tree(
    X,
    y,
    weights=None,
    min_leaf: int = 1,
    max_depth: int | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    n_classes: int = 3,
) -> TreeModel:
    """Grow a CART tree greedily on weighted Gini impurity.

    Labels are 1..n_classes. Growth stops at weighted purity, when no split
    leaves ``min_leaf`` rows on both sides, or at ``max_depth``. With
    ``max_features`` set, each split considers a fresh random subset of that
    many non-constant features (drawn from ``rng``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, m = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(w < 0) or not w.sum() > 0:
        raise ValueError("tree weights must be non-negative with a positive sum")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if max_features is not None and rng is None:
        rng = np.random.default_rng()
    wy = np.zeros((n, n_classes))
    wy[np.arange(n), y - 1] = w
    # integer-valued data with few levels uses the histogram split search
    codes, base, n_levels = None, None, 0
    if n and np.all(np.isfinite(X)) and np.array_equal(X, np.round(X)):
        base = X.min(axis=0)
        span = int((X.max(axis=0) - base).max()) + 1
        if span <= MAX_LEVELS:
            codes, n_levels = (X - base).astype(np.intp), max(span, 2)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(dist):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(dist)
        return len(feature) - 1

    def distribution(idx, fallback):
        tot = wy[idx].sum(axis=0)
        s = tot.sum()
        return tot / s if s > 0 else fallback

    root_dist = distribution(np.arange(n), None)
    stack = [(new_node(root_dist), np.arange(n), 0)]
    while stack:
        t, idx, depth = stack.pop()
        dist = value[t]
        if (
            np.count_nonzero(dist) <= 1
            or idx.size < 2 * min_leaf
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        Xn = X[idx]
        cols = np.flatnonzero(Xn.max(axis=0) > Xn.min(axis=0))
        if cols.size == 0:
            continue
        if max_features is not None and max_features < cols.size:
            cols = np.sort(rng.choice(cols, size=max_features, replace=False))
        if codes is not None:
            found = _best_split_levels(codes[np.ix_(idx, cols)], wy[idx], min_leaf, n_levels)
            if found is None:
                continue
            c, level, counts = found
            j = int(cols[c])
            upper = level + 1 + int(np.flatnonzero(counts[level + 1:])[0])
            thr = base[j] + 0.5 * (level + upper)
        else:
            found = _best_split(Xn[:, cols], wy[idx], min_leaf)
            if found is None:
                continue
            c, thr = found
            j = int(cols[c])
        mask = Xn[:, j] < thr
        li, ri = idx[mask], idx[~mask]
        lt = new_node(distribution(li, dist))
        rt = new_node(distribution(ri, dist))
        feature[t], threshold[t], left[t], right[t] = j, float(thr), lt, rt
        # right pushed first so the left subtree is expanded first
        stack.append((rt, ri, depth + 1))
        stack.append((lt, li, depth + 1))

    return TreeModel(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=float),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(value, dtype=float),
        min_leaf,
    )
