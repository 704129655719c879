"""Dual of the selection-matrix subproblem and its box-constrained QP solver.

With ``(w, b)`` and the reweighting diagonal ``D`` fixed, the selection
matrix update is a convex quadratic program with hinge constraints. Its dual
in the multipliers ``alpha`` is

    L_d(alpha) = 0.5 alpha^T K alpha + q^T alpha + g,    0 <= alpha <= C*

with ``K_ij = 2 y_i y_j p_ij``. The maximizer ``alpha`` plugs into the closed
form ``Phi = Z (sum_i alpha_i y_i x_i w^T + 2 X X^T)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DualProblem:
    """Dense dual problem.

    Attributes
    ----------
    K : ndarray (n, n)
        Quadratic term, ``K_ij = 2 y_i y_j p_ij``.
    q : ndarray (n,)
        Linear term.
    box_upper : float
        ``C* = pi * C``.
    g : float
        Constant offset, kept for diagnostics only.
    Z : ndarray (m, m)
        ``0.5 * (XX^T + lambda1 D + lambda2 L)^{-1}``.
    R : ndarray (m, m)
        ``XX^T + lambda1 D + lambda2 L``.
    """

    K: np.ndarray
    q: np.ndarray
    box_upper: float
    g: float
    Z: np.ndarray
    R: np.ndarray

    def value(self, alpha) -> float:
        """Dual objective including the constant ``g``."""
        alpha = np.asarray(alpha)
        return float(0.5 * alpha @ self.K @ alpha + self.q @ alpha + self.g)


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    gamma: np.ndarray
    dual_value: float
    n_sweeps: int = 0
    converged: bool = True


def system_matrix(XXt, reweight, lambda1, lambda2, L) -> np.ndarray:
    M = XXt + lambda2 * L
    M[np.diag_indices_from(M)] += lambda1 * np.asarray(reweight)
    return M


def ridge_epsilon(XXt) -> float:
    return 1e-10 * float(np.trace(XXt)) / XXt.shape[0]


def inverse_system(M, XXt) -> np.ndarray:
    """Inverse of the symmetric system matrix, with a ridge if it is singular."""
    try:
        cf = linalg.cho_factor(M, check_finite=False)
        return linalg.cho_solve(cf, np.eye(M.shape[0]), check_finite=False)
    except linalg.LinAlgError:
        pass
    eps = ridge_epsilon(XXt)
    Mr = M + eps * np.eye(M.shape[0])
    try:
        cf = linalg.cho_factor(Mr, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError("regularize: increase lambda1 or add ridge epsilon") from exc
    logger.debug("system matrix singular; added ridge %g", eps)
    return linalg.cho_solve(cf, np.eye(M.shape[0]), check_finite=False)


def build_dual(X, y, w, b, reweight, lambda1, lambda2, L, c_star,
               M_inv: np.ndarray | None = None, XXt: np.ndarray | None = None) -> DualProblem:
    """Assemble ``K``, ``q`` and ``g`` for fixed ``(w, b, D)``.

    Parameters
    ----------
    X : ndarray (m, n)
        Data matrix with samples as columns.
    y : ndarray (n,)
    w, b : hyperplane of the current classifier
    reweight : ndarray (m,)
        Diagonal of the l2,1 reweighting matrix.
    L : ndarray (m, m)
        Graph Laplacian.
    c_star : float
        Box bound on ``alpha``.
    M_inv : ndarray (m, m), optional
        Precomputed inverse of ``XX^T + lambda1 D + lambda2 L``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if not c_star > 0:
        raise ValueError("box bound must be positive")
    if XXt is None:
        XXt = X @ X.T
    R = system_matrix(XXt, reweight, lambda1, lambda2, L)
    if M_inv is None:
        M_inv = inverse_system(R, XXt)
    Z = 0.5 * M_inv
    Z = 0.5 * (Z + Z.T)

    ZRZ = Z @ R @ Z
    ww = float(w @ w)
    ZX = Z @ X
    # p_ij = tr(w x_i^T Z^T R Z x_j w^T) - w^T w x_i^T Z^T x_j
    P = ww * (X.T @ (ZRZ @ X)) - ww * (X.T @ ZX)
    K = 2.0 * np.outer(y, y) * P
    K = 0.5 * (K + K.T)

    G = XXt
    GZ = G @ Z
    # q_i = 1 - y_i b - 2 y_i w^T (XX^T Z^T) x_i
    #       - y_i tr[(XX^T Z - 2 XX^T Z^T R Z) x_i w^T]
    #       - y_i tr[w x_i^T (Z^T XX^T - 2 Z^T R Z XX^T)]
    A1 = GZ - 2.0 * G @ ZRZ
    A2 = Z @ G - 2.0 * ZRZ @ G
    q = (1.0 - y * b - 2.0 * y * (w @ GZ @ X)
         - y * (w @ A1 @ X) - y * (w @ A2 @ X))
    g = (np.trace(G) - 2.0 * np.trace(G @ Z @ G) - 2.0 * np.trace(G @ Z.T @ G)
         + 4.0 * np.trace(G @ ZRZ @ G))
    return DualProblem(K, q, float(c_star), float(g), Z, R)


def gamma_from_alpha(alpha, c_star: float) -> np.ndarray:
    """Slack multipliers ``gamma = C* 1 - alpha``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 0) or np.any(alpha > c_star):
        raise ValueError("alpha outside the box [0, C*]")
    return c_star - alpha


def projected_gradient(alpha, grad, upper) -> np.ndarray:
    """Projected gradient for maximization over ``[0, upper]``."""
    pg = grad.copy()
    pg[(alpha <= 0) & (grad < 0)] = 0.0
    pg[(alpha >= upper) & (grad > 0)] = 0.0
    return pg


def solve_box_qp(problem: DualProblem, alpha0=None, tol: float = 1e-6,
                 max_sweeps: int = 10_000,
                 callback: Callable[[np.ndarray], None] | None = None,
                 check_concavity: bool = True) -> DualSolution:
    """Maximize ``0.5 a^T K a + q^T a`` over ``0 <= a <= C*``.

    Cyclic coordinate ascent with exact one-dimensional maximization and
    clipping. Stops once the projected gradient norm is at most
    ``tol * max(1, ||q||)``. ``callback`` sees every iterate after each sweep.
    """
    K, q, C = problem.K, problem.q, problem.box_upper
    n = q.shape[0]
    if check_concavity and n:
        top = float(np.linalg.eigvalsh(K)[-1])
        if top > 1e-6 * max(np.linalg.norm(K, 2), 1e-300):
            logger.warning("dual not concave (top eigenvalue %.3g); result is a stationary point", top)
    alpha = np.zeros(n) if alpha0 is None else np.clip(np.asarray(alpha0, dtype=np.float64), 0.0, C)
    grad = K @ alpha + q
    diag = np.diag(K).copy()
    threshold = tol * max(1.0, float(np.linalg.norm(q)))
    sweeps = 0
    converged = False
    for sweeps in range(1, max_sweeps + 1):
        if np.linalg.norm(projected_gradient(alpha, grad, C)) <= threshold:
            converged = True
            sweeps -= 1
            break
        for i in range(n):
            gi = grad[i]
            kii = diag[i]
            if kii < 0:
                new = alpha[i] - gi / kii
            elif gi > 0:
                new = C
            elif gi < 0:
                new = 0.0
            else:
                continue
            new = min(max(new, 0.0), C)
            delta = new - alpha[i]
            if delta != 0.0:
                alpha[i] = new
                grad += delta * K[:, i]
        if callback is not None:
            callback(alpha)
    else:
        converged = np.linalg.norm(projected_gradient(alpha, grad, C)) <= threshold
        if not converged:
            logger.warning("box QP hit %d sweeps without reaching tolerance", max_sweeps)
    return DualSolution(alpha, C - alpha, problem.value(alpha), sweeps, bool(converged))
