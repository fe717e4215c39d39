"""Independent reference implementations used only by the tests.

These are written for obviousness rather than speed: plain loops, direct
enumeration and textbook formulas, sharing no code with the package.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------- metrics


def brute_metrics(true, pred, k=3):
    """Tally TP/FP/FN per class with a loop and apply the textbook formulas."""
    true, pred = list(map(int, true)), list(map(int, pred))
    n = len(true)
    correct = sum(1 for t, p in zip(true, pred) if t == p)
    out = {"accuracy": correct / n, "precision": [], "recall": [], "f": []}
    for c in range(1, k + 1):
        tp = sum(1 for t, p in zip(true, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(true, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(true, pred) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out["precision"].append(prec)
        out["recall"].append(rec)
        out["f"].append(f)
    return out


def brute_brier(true, probs):
    n, k = len(probs), len(probs[0])
    total = 0.0
    for i in range(n):
        for j in range(k):
            target = 1.0 if true[i] == j + 1 else 0.0
            total += (target - probs[i][j]) ** 2
    return total / (n * k)


# ---------------------------------------------------------------- rank tests


def _midranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def kw_h(values, groups):
    """Tie-corrected Kruskal-Wallis H by the textbook formula."""
    n = len(values)
    r = _midranks(values)
    h = 0.0
    for g in sorted(set(groups)):
        rs = [r[i] for i in range(n) if groups[i] == g]
        h += sum(rs) ** 2 / len(rs)
    h = 12.0 / (n * (n + 1)) * h - 3 * (n + 1)
    ties = {}
    for v in values:
        ties[v] = ties.get(v, 0) + 1
    corr = 1 - sum(t**3 - t for t in ties.values()) / (n**3 - n)
    return h / corr if corr > 0 else 0.0


def exact_kw_p(values, groups):
    """P(H >= H_obs) over every distinct relabelling of the observations
    that keeps the group sizes."""
    h_obs = kw_h(values, groups)
    labels = sorted(set(groups))
    sizes = [list(groups).count(g) for g in labels]
    hits = total = 0
    for perm in itertools.product(labels, repeat=len(groups)):
        if [perm.count(g) for g in labels] != sizes:
            continue
        total += 1
        if kw_h(values, list(perm)) >= h_obs - 1e-9:
            hits += 1
    return hits / total


def exact_ranksum_p(a, b):
    """Two-sided exact p of the rank-sum statistic over all splits."""
    vals = list(a) + list(b)
    r = _midranks(vals)
    na, n = len(a), len(vals)
    mean = na * (n + 1) / 2
    obs = abs(sum(r[:na]) - mean)
    hits = total = 0
    for combo in itertools.combinations(range(n), na):
        total += 1
        if abs(sum(r[i] for i in combo) - mean) >= obs - 1e-9:
            hits += 1
    return hits / total


def pearson_of_midranks(x, y):
    rx, ry = _midranks(list(x)), _midranks(list(y))
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sxx = sum((a - mx) ** 2 for a in rx)
    syy = sum((b - my) ** 2 for b in ry)
    return sxy / math.sqrt(sxx * syy)


# ---------------------------------------------------------------- SVM dual


def projected_gradient_dual(K, y, upper, iters=20000):
    """Accelerated projected gradient on min 1/2 a'Qa - sum(a) over
    {0 <= a <= U, y'a = 0}; exact projection through the multiplier's breakpoints."""
    y = np.asarray(y, dtype=float)
    U = np.broadcast_to(np.asarray(upper, dtype=float), y.shape)
    Q = np.outer(y, y) * K
    L = max(np.linalg.eigvalsh(Q).max(), 1e-12)

    def project(v):
        # g(lam) = y . clip(v - lam*y, 0, U) is piecewise linear and
        # non-increasing; find its root among the breakpoints exactly
        bps = np.sort(np.concatenate([v / y, (v - U) / y]))
        g = (np.clip(v[None, :] - bps[:, None] * y[None, :], 0, U) * y).sum(axis=1)
        k = int(np.searchsorted(-g, 0.0))
        if k == 0:
            lam = bps[0]
        elif k == bps.size:
            lam = bps[-1]
        elif g[k - 1] == g[k]:
            lam = bps[k]
        else:
            lam = bps[k - 1] + (bps[k] - bps[k - 1]) * g[k - 1] / (g[k - 1] - g[k])
        return np.clip(v - lam * y, 0, U)

    a = np.zeros_like(y)
    z = a.copy()
    t = 1.0
    for _ in range(iters):
        a_next = project(z - (Q @ z - 1.0) / L)
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        z = a_next + (t - 1) / t_next * (a_next - a)
        a, t = a_next, t_next
    return a


def dual_value(a, y, K):
    ay = np.asarray(a) * np.asarray(y)
    return 0.5 * float(ay @ K @ ay) - float(np.sum(a))


# ---------------------------------------------------------------- decisions


def expected_cost_argmin(posterior, C):
    """Enumerate predictions y, accumulate sum_k P(k) C[y][k] in a loop and
    keep the first minimum."""
    best, best_cost = None, math.inf
    k = len(posterior)
    for yhat in range(k):
        cost = 0.0
        for truth in range(k):
            cost += posterior[truth] * C[yhat][truth]
        if cost < best_cost:
            best, best_cost = yhat + 1, cost
    return best


def weighted_vote(learner_probs, betas):
    """Final boosting hypothesis by a loop over learners: per point, class
    with the largest sum of log(1/beta) * confidence, first maximum wins."""
    n, k = learner_probs[0].shape
    labels = []
    for i in range(n):
        scores = [0.0] * k
        for probs, beta in zip(learner_probs, betas):
            for c in range(k):
                scores[c] += math.log(1.0 / beta) * probs[i][c]
        labels.append(max(range(k), key=lambda c: (scores[c], -c)) + 1)
    return np.array(labels)


def brute_knn(Xtr, ytr, x, k, n_classes=3):
    d = [(float(np.sum((row - x) ** 2)), i) for i, row in enumerate(Xtr)]
    d.sort()
    votes = [0] * n_classes
    for _, i in d[:k]:
        votes[ytr[i] - 1] += 1
    return max(range(n_classes), key=lambda c: (votes[c], -c)) + 1


def largest_remainder(n, props):
    quotas = [n * p for p in props]
    counts = [math.floor(q) for q in quotas]
    left = n - sum(counts)
    fr = sorted(range(len(props)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in fr[:left]:
        counts[i] += 1
    return counts
