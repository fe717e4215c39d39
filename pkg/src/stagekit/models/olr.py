"""Proportional-odds (cumulative logit) model for three ordered stages.

    logit P(y <= 1 | x) = alpha_1 + x . beta
    logit P(y <= 2 | x) = alpha_2 + x . beta,   alpha_1 <= alpha_2

The fit maximises the log-likelihood by damped Newton over
(alpha_1, log(alpha_2 - alpha_1), beta), which keeps the intercepts ordered.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit


class ConvergenceWarning(UserWarning):
    pass


@dataclass(eq=False)
class OLRModel:
    intercepts: np.ndarray
    coefficients: np.ndarray
    converged: bool = True
    separated: bool = False
    n_iter: int = 0
    trace: list = field(default_factory=list)

    def cumulative(self, X) -> np.ndarray:
        """P(y <= 1 | x) and P(y <= 2 | x) as an n x 2 array."""
        eta = np.atleast_2d(np.asarray(X, dtype=float)) @ self.coefficients
        return expit(self.intercepts[None, :] + eta[:, None])

    def predict_proba(self, X) -> np.ndarray:
        eta = np.atleast_2d(np.asarray(X, dtype=float)) @ self.coefficients
        a1, a2 = self.intercepts
        p1 = expit(a1 + eta)
        p3 = expit(-(a2 + eta))
        p2 = np.clip(1.0 - p1 - p3, 0.0, None)
        return np.column_stack([p1, p2, p3])

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1) + 1


def predict_olr(model: OLRModel, x) -> np.ndarray:
    return model.predict_proba(np.asarray(x, dtype=float)[None, :])[0]


def _per_row(u1, u2, y):
    """Log-likelihood terms and first/second derivatives in (u1, u2)."""
    n = y.size
    ll = np.empty(n)
    g1 = np.zeros(n)
    g2 = np.zeros(n)
    h11 = np.zeros(n)
    h12 = np.zeros(n)
    h22 = np.zeros(n)

    r = y == 1
    ll[r] = log_expit(u1[r])
    g1[r] = expit(-u1[r])
    h11[r] = -expit(u1[r]) * expit(-u1[r])

    r = y == 3
    ll[r] = log_expit(-u2[r])
    g2[r] = -expit(u2[r])
    h22[r] = -expit(u2[r]) * expit(-u2[r])

    r = y == 2
    a, b = u1[r], u2[r]
    gap = -np.expm1(-(b - a))  # 1 - exp(-(u2 - u1)), in (0, 1]
    with np.errstate(divide="ignore"):
        ll[r] = log_expit(b) + log_expit(-a) + np.log(gap)
    # f(u) = s(u)(1 - s(u)); D = s(u2) - s(u1) = s(u2) s(-u1) gap
    f1_over_d = expit(a) / (expit(b) * gap)
    f2_over_d = expit(-b) / (expit(-a) * gap)
    g1[r] = -f1_over_d
    g2[r] = f2_over_d
    h11[r] = -f1_over_d * (1 - 2 * expit(a)) - f1_over_d**2
    h22[r] = f2_over_d * (1 - 2 * expit(b)) - f2_over_d**2
    h12[r] = f1_over_d * f2_over_d
    return ll, g1, g2, h11, h12, h22


def loglik(intercepts, coefficients, X, y) -> float:
    X = np.asarray(X, dtype=float)
    eta = X @ np.asarray(coefficients, dtype=float)
    ll, *_ = _per_row(intercepts[0] + eta, intercepts[1] + eta, np.asarray(y))
    return float(ll.sum())


def loglik_gradient(intercepts, coefficients, X, y) -> np.ndarray:
    """Gradient of the log-likelihood w.r.t. (alpha_1, alpha_2, beta)."""
    X = np.asarray(X, dtype=float)
    eta = X @ np.asarray(coefficients, dtype=float)
    _, g1, g2, *_ = _per_row(intercepts[0] + eta, intercepts[1] + eta, np.asarray(y))
    return np.concatenate([[g1.sum(), g2.sum()], X.T @ (g1 + g2)])


def _objective(theta, X, y, hessian=True):
    a1, delta, beta = theta[0], theta[1], theta[2:]
    gap = np.exp(delta)
    eta = X @ beta
    ll, g1, g2, h11, h12, h22 = _per_row(a1 + eta, a1 + gap + eta, y)
    grad = np.concatenate([[np.sum(g1 + g2), gap * g2.sum()], X.T @ (g1 + g2)])
    if not hessian:
        return ll.sum(), grad
    n, p = X.shape[0], theta.size
    J1 = np.zeros((n, p))
    J1[:, 0] = 1.0
    J1[:, 2:] = X
    J2 = J1.copy()
    J2[:, 1] = gap
    H = (J1.T * h11) @ J1 + (J1.T * h12) @ J2 + (J2.T * h12) @ J1 + (J2.T * h22) @ J2
    H[1, 1] += gap * g2.sum()
    return ll.sum(), grad, H


def fit_olr(X, y, tol: float = 1e-6, max_iter: int = 500) -> OLRModel:
    """Maximum-likelihood proportional-odds fit.

    Stops when the gradient norm drops below ``tol`` or after ``max_iter``
    Newton steps. Complete separation (log-likelihood driven to ~0 while the
    coefficients grow) is reported through ``separated``/``converged`` and a
    ConvergenceWarning; the last iterate is still returned.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    n, m = X.shape
    counts = np.bincount(y, minlength=4)[1:4]
    if np.any(counts == 0):
        raise ValueError("ordinal logistic regression needs all three stages present")
    cum = np.cumsum(counts)[:2] / n
    alpha = np.log(cum / (1 - cum))
    theta = np.concatenate([[alpha[0], np.log(alpha[1] - alpha[0])], np.zeros(m)])

    trace = []
    lam = 0.0
    converged = False
    it = 0
    ll, grad, H = _objective(theta, X, y)
    for it in range(1, max_iter + 1):
        trace.append(float(ll))
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        A = -H
        scale = max(1.0, float(np.max(np.abs(np.diag(A)))))
        accepted = False
        while lam < 1e12 * scale:
            try:
                L = np.linalg.cholesky(A + lam * np.eye(theta.size))
            except np.linalg.LinAlgError:
                lam = max(10 * lam, 1e-8 * scale)
                continue
            step = np.linalg.solve(L.T, np.linalg.solve(L, grad))
            cand = theta + step
            cand_ll, *_ = _objective(cand, X, y, hessian=False)
            if np.isfinite(cand_ll) and cand_ll >= ll - 1e-12 * abs(ll):
                theta = cand
                accepted = True
                lam = lam / 10 if lam > 1e-10 * scale else 0.0
                break
            lam = max(10 * lam, 1e-8 * scale)
        if not accepted:
            break
        ll, grad, H = _objective(theta, X, y)
    else:
        trace.append(float(ll))

    separated = -ll / n < 1e-4
    if separated:
        converged = False
    model = OLRModel(
        np.array([theta[0], theta[0] + np.exp(theta[1])]),
        theta[2:].copy(),
        converged=converged,
        separated=separated,
        n_iter=it,
        trace=trace,
    )
    if not converged:
        reason = "complete separation; coefficients diverge" if separated else "iteration limit"
        warnings.warn(
            f"ordinal logistic fit did not converge ({reason}) after {it} iterations, "
            f"final log-likelihood {ll:.6g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return model
