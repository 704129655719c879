"""Soft-margin linear SVM with an l1 or squared-l2 margin regularizer."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperplane:
    """Separating hyperplane ``w^T x + b = 0``.

    ``flavor`` is the margin norm used at fit time: 1 for ``||w||_1`` and
    2 for ``0.5 * ||w||_2^2``.
    """

    w: np.ndarray
    b: float
    flavor: int = 2

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)) or not np.isfinite(self.b):
            raise ValueError("hyperplane must be finite")
        if self.flavor not in (1, 2):
            raise ValueError("flavor must be 1 or 2")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    def regularizer(self) -> float:
        return margin_regularizer(self.w, self.flavor)

    def decision_function(self, Xhat) -> np.ndarray:
        """Scores for projected samples stored as columns of ``Xhat`` (m x n)."""
        return self.w @ np.asarray(Xhat) + self.b

    def to_dict(self) -> dict:
        return {"flavor": self.flavor, "b": self.b, "w": self.w.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperplane":
        return cls(np.asarray(d["w"], dtype=np.float64), float(d["b"]), int(d["flavor"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Hyperplane":
        return cls.from_dict(json.loads(text))


def hinge_loss(y, score):
    """``max(0, 1 - y * score)``; vectorizes over arrays."""
    return np.maximum(0.0, 1.0 - np.asarray(y, dtype=np.float64) * score)


def margin_regularizer(w, flavor: int) -> float:
    w = np.asarray(w)
    if flavor == 1:
        return float(np.abs(w).sum())
    return 0.5 * float(w @ w)


def svm_objective(h: Hyperplane, Xhat, y, C: float) -> float:
    """``reg(w) + C * sum_i hinge(y_i, w^T xhat_i + b)``."""
    return h.regularizer() + C * float(hinge_loss(y, h.decision_function(Xhat)).sum())


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("label must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("both classes must be present")
    return y


def fit_svm(Xhat, y, C: float = 1.0, flavor: int = 2, tol: float = 1e-8,
            max_iter: int = 100_000) -> Hyperplane:
    """Fit a linear soft-margin SVM on samples stored as columns of ``Xhat``.

    Parameters
    ----------
    Xhat : array of shape (m, n)
        Projected samples, one per column.
    y : array of shape (n,)
        Labels in {-1, +1}; both classes required.
    C : float
        Hinge-loss weight.
    flavor : {1, 2}
        2 solves ``0.5||w||^2 + C sum hinge`` by SMO on the dual; 1 solves
        ``||w||_1 + C sum hinge`` as a linear program.
    tol : float
        Maximal KKT violation accepted by the SMO solver.
    max_iter : int
        Cap on SMO pair updates.
    """
    Xhat = np.asarray(Xhat, dtype=np.float64)
    if Xhat.ndim != 2:
        raise ValueError("Xhat must be 2-D (features x samples)")
    y = _check_labels(y)
    if Xhat.shape[1] != y.shape[0]:
        raise ValueError(f"Xhat has {Xhat.shape[1]} samples but y has {y.shape[0]}")
    if not C > 0:
        raise ValueError("C must be positive")
    if flavor == 2:
        return _fit_l2(Xhat, y, C, tol, max_iter)
    if flavor == 1:
        return _fit_l1(Xhat, y, C)
    raise ValueError("flavor must be 1 or 2")


def _fit_l2(Xhat, y, C, tol, max_iter):
    # SMO with second-order working-set selection (Fan, Chen & Lin 2005).
    n = y.shape[0]
    Yx = Xhat * y
    Q = Yx.T @ Yx
    diagQ = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    tau = 1e-12
    for it in range(max_iter):
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        score = -y * grad
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m_val = score[i]
        M_val = np.min(np.where(low, score, np.inf))
        if m_val - M_val < tol:
            break
        b_it = m_val - score
        cand = low & (b_it > 0)
        a_it = diagQ[i] + diagQ - 2.0 * y[i] * y * Q[i]
        a_it = np.where(a_it > 0, a_it, tau)
        gain = np.where(cand, -(b_it ** 2) / a_it, np.inf)
        j = int(np.argmin(gain))
        # analytic two-variable update along y_i d_i = -y_j d_j
        a = a_it[j]
        step = b_it[j] / a
        # direction: alpha_i += y_i * t, alpha_j -= y_j * t, bounded by the box
        t_max_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
        t_max_j = alpha[j] if y[j] > 0 else (C - alpha[j])
        t = min(step, t_max_i, t_max_j)
        di, dj = y[i] * t, -y[j] * t
        alpha[i] = min(max(alpha[i] + di, 0.0), C)
        alpha[j] = min(max(alpha[j] + dj, 0.0), C)
        grad += Q[:, i] * di + Q[:, j] * dj
    else:
        logger.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    w = Yx @ alpha
    free = (alpha > 0) & (alpha < C)
    yg = y * grad
    if free.any():
        rho = float(yg[free].mean())
    else:
        # no free support vector: midpoint of the feasible offset interval
        at_ub = alpha >= C
        at_lb = alpha <= 0
        ub_mask = (at_ub & (y < 0)) | (at_lb & (y > 0))
        lb_mask = (at_ub & (y > 0)) | (at_lb & (y < 0))
        ub = yg[ub_mask].min() if ub_mask.any() else np.inf
        lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return Hyperplane(w, -rho, 2)


def _fit_l1(Xhat, y, C):
    # variables: [w+ (m), w- (m), b+, b-, xi (n)], all >= 0
    m, n = Xhat.shape
    Yx = (Xhat * y).T
    cost = np.concatenate([np.ones(2 * m), [0.0, 0.0], np.full(n, C)])
    A_ub = np.hstack([-Yx, Yx, -y[:, None], y[:, None], -np.eye(n)])
    b_ub = -np.ones(n)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=(0, None), method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"l1-SVM linear program failed: {res.message}")
    x = res.x
    w = x[:m] - x[m:2 * m]
    return Hyperplane(w, x[2 * m] - x[2 * m + 1], 1)


def predict(h: Hyperplane, phi, x) -> np.ndarray | int:
    """Labels ``sign(w^T Phi^T x + b)`` with ``sign(0) = +1``.

    ``x`` is one sample of length m or a matrix with samples as columns.
    """
    phi = np.asarray(phi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if phi.shape[0] != x.shape[0] or phi.shape[1] != h.w.shape[0]:
        raise ValueError("dimension mismatch between hyperplane, selection and sample")
    score = h.w @ (phi.T @ x) + h.b
    labels = np.where(score >= 0, 1, -1)
    return int(labels) if labels.ndim == 0 else labels


class LinearMarginSVC(BaseEstimator, ClassifierMixin):
    """sklearn-compatible wrapper around :func:`fit_svm`.

    Takes the usual ``(n_samples, n_features)`` layout; any two labels are
    mapped to -1/+1 in sorted order.
    """

    def __init__(self, C=1.0, flavor=2, tol=1e-8, max_iter=100_000):
        self.C = C
        self.flavor = flavor
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError("LinearMarginSVC needs exactly two classes")
        ypm = np.where(y == self.classes_[1], 1.0, -1.0)
        self.hyperplane_ = fit_svm(X.T, ypm, self.C, self.flavor, self.tol, self.max_iter)
        self.coef_ = self.hyperplane_.w.reshape(1, -1)
        self.intercept_ = np.array([self.hyperplane_.b])
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        return X @ self.hyperplane_.w + self.hyperplane_.b

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])
