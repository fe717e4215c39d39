"""Cost-sensitive one-vs-one RBF SVM trained by SMO.

The binary solver works on the standard dual

    min_a  1/2 a' Q a - sum(a)   s.t.  y'a = 0,  0 <= a_t <= U_t

with Q_st = y_s y_t K(x_s, x_t) and a per-sample upper bound U_t, which is
C times the cost of the sample's class. Working pairs are chosen as the
maximal KKT violators.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

logger = logging.getLogger(__name__)

TAU = 1e-12
REFERENCE_C = 33.0416
REFERENCE_GAMMA = 0.0355
REFERENCE_CLASS_COSTS = (2.0, 1.0, 2.7733)


def rbf_kernel(x, x2, gamma: float):
    """exp(-gamma ||x - x2||^2); matrices give the full Gram matrix."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    a = np.asarray(x, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.ndim == 1 and b.ndim == 1:
        if a.shape != b.shape:
            raise ValueError("dimension mismatch")
        return float(np.exp(-gamma * np.sum((a - b) ** 2)))
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    d2 = (a**2).sum(1)[:, None] + (b**2).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(d2, 0.0))


def dual_objective(alpha, y, K) -> float:
    """1/2 a'Qa - sum(a), the quantity SMO minimises."""
    ay = alpha * y
    return 0.5 * float(ay @ K @ ay) - float(alpha.sum())


@dataclass
class SMOResult:
    alpha: np.ndarray
    rho: float
    n_iter: int
    converged: bool
    kkt_gap: float


def smo(K, y, upper, tol: float = 1e-3, max_iter: int = 100_000) -> SMOResult:
    """Solve the box-constrained dual for labels y in {-1, +1}.

    Stops when the maximal violating pair gap m(a) - M(a) drops to ``tol``.
    """
    y = np.asarray(y, dtype=float)
    U = np.broadcast_to(np.asarray(upper, dtype=float), y.shape).copy()
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    a = np.zeros(n)
    G = -np.ones(n)
    gap = np.inf
    it = 0
    converged = False
    while it < max_iter:
        pos, neg = y > 0, y < 0
        up = (pos & (a < U)) | (neg & (a > 0))
        low = (pos & (a > 0)) | (neg & (a < U))
        score = -y * G
        if not up.any() or not low.any():
            gap = 0.0
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        gap = score[i] - score[j]
        if gap <= tol:
            converged = True
            break
        it += 1
        ai, aj = a[i], a[j]
        Ci, Cj = U[i], U[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            delta = (-G[i] - G[j]) / (quad if quad > 0 else TAU)
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > Ci - Cj:
                if a[i] > Ci:
                    a[i], a[j] = Ci, Ci - diff
            elif a[j] > Cj:
                a[j], a[i] = Cj, Cj + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            delta = (G[i] - G[j]) / (quad if quad > 0 else TAU)
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > Ci:
                if a[i] > Ci:
                    a[i], a[j] = Ci, total - Ci
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > Cj:
                if a[j] > Cj:
                    a[j], a[i] = Cj, total - Cj
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        G += Q[:, i] * (a[i] - ai) + Q[:, j] * (a[j] - aj)
    return SMOResult(a, _rho(a, y, G, U), it, converged, float(gap))


def _rho(a, y, G, U):
    yG = y * G
    free = (a > 0) & (a < U)
    if free.any():
        return float(yG[free].mean())
    # no free vectors: midpoint of the feasible interval
    pos, neg = y > 0, y < 0
    at_upper = a >= U
    at_zero = a <= 0
    ub_set = (at_upper & neg) | (at_zero & pos)
    lb_set = (at_upper & pos) | (at_zero & neg)
    ub = yG[ub_set].min() if ub_set.any() else np.inf
    lb = yG[lb_set].max() if lb_set.any() else -np.inf
    if np.isinf(ub) or np.isinf(lb):
        return float(ub if np.isfinite(ub) else lb)
    return float((ub + lb) / 2)


def kkt_residuals(alpha, y, K, upper, rho) -> np.ndarray:
    """Per-sample KKT violation of the binary solution (0 when satisfied)."""
    f = K @ (alpha * y) - rho
    margin = y * f
    U = np.broadcast_to(upper, alpha.shape)
    eps = 1e-9 * np.maximum(1.0, U)
    r = np.zeros_like(margin)
    lower = alpha <= eps
    upper_b = alpha >= U - eps
    free = ~lower & ~upper_b
    r[lower] = np.maximum(0.0, 1.0 - margin[lower])
    r[upper_b] = np.maximum(0.0, margin[upper_b] - 1.0)
    r[free] = np.abs(margin[free] - 1.0)
    return r


@dataclass(eq=False)
class SVMBinaryModel:
    """Pair (i, j): class i is the +1 side."""

    classes: tuple
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_t * y_t
    rho: float
    gamma: float
    penalties: tuple
    n_iter: int = 0
    converged: bool = True
    kkt_gap: float = 0.0

    def decision(self, Z) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(np.atleast_2d(Z).shape[0], -self.rho)
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.dual_coef - self.rho


@dataclass(eq=False)
class SVMMulticlassModel:
    binaries: list
    classes: tuple = (1, 2, 3)
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def transform(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.mean is None:
            return X
        return (X - self.mean) / self.scale

    def decision_values(self, X) -> np.ndarray:
        """n x (number of pairs) decision values, pairs in lexicographic order."""
        Z = self.transform(X)
        return np.column_stack([b.decision(Z) for b in self.binaries])

    def votes(self, X) -> np.ndarray:
        dv = self.decision_values(X)
        index = {c: k for k, c in enumerate(self.classes)}
        v = np.zeros((dv.shape[0], len(self.classes)), dtype=int)
        for col, b in enumerate(self.binaries):
            ci, cj = index[b.classes[0]], index[b.classes[1]]
            win_i = dv[:, col] > 0
            v[win_i, ci] += 1
            v[~win_i, cj] += 1
        return v

    def predict(self, X) -> np.ndarray:
        dv = self.decision_values(X)
        v = self.votes(X)
        return np.array([self._resolve(v[r], dv[r]) for r in range(v.shape[0])])

    def _resolve(self, votes, dv):
        top = np.flatnonzero(votes == votes.max())
        if top.size == 2:
            ci, cj = self.classes[top[0]], self.classes[top[1]]
            for col, b in enumerate(self.binaries):
                if b.classes == (ci, cj):
                    return ci if dv[col] > 0 else cj
        return self.classes[top[0]]


def predict_svm(model: SVMMulticlassModel, x):
    x = np.asarray(x, dtype=float)[None, :]
    return int(model.predict(x)[0]), model.votes(x)[0]


def fit_svm_ovo(
    X,
    y,
    C: float = REFERENCE_C,
    gamma: float = REFERENCE_GAMMA,
    class_costs=REFERENCE_CLASS_COSTS,
    tol: float = 1e-3,
    max_passes: int = 200,
    seed: int = 0,
    standardize: bool = True,
) -> SVMMulticlassModel:
    """One binary SMO problem per class pair, with box bounds C * cost of the
    side's class. Features are standardised with the training mean and
    standard deviation unless ``standardize`` is False. ``max_passes`` caps
    SMO at max_passes * n_pair iterations; hitting it is logged and recorded
    on the binary model. ``seed`` is unused (SMO here is deterministic)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if not C > 0:
        raise ValueError("C must be positive")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ValueError("SVM needs at least two classes")
    costs = np.asarray(class_costs, dtype=float)
    if np.any(~(costs > 0)) or costs.size < max(classes):
        raise ValueError("class costs must be positive, one per class")
    mean = scale = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale
    binaries = []
    for ci, cj in combinations(classes, 2):
        rows = np.flatnonzero((y == ci) | (y == cj))
        Xp = X[rows]
        s = np.where(y[rows] == ci, 1.0, -1.0)
        upper = np.where(s > 0, C * costs[ci - 1], C * costs[cj - 1])
        K = rbf_kernel(Xp, Xp, gamma)
        res = smo(K, s, upper, tol=tol, max_iter=max_passes * max(rows.size, 1))
        if not res.converged:
            logger.warning("SMO for pair (%d, %d) stopped after %d iterations, gap %.3g",
                           ci, cj, res.n_iter, res.kkt_gap)
        sv = res.alpha > 0
        binaries.append(SVMBinaryModel(
            (ci, cj), Xp[sv], (res.alpha * s)[sv], res.rho, float(gamma),
            (float(C * costs[ci - 1]), float(C * costs[cj - 1])),
            res.n_iter, res.converged, res.kkt_gap,
        ))
    params = {"C": float(C), "gamma": float(gamma), "class_costs": costs.tolist(),
              "tol": tol, "max_passes": max_passes, "standardize": standardize}
    return SVMMulticlassModel(binaries, classes, mean, scale, params)
