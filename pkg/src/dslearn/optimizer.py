"""Alternating minimization for discriminative subgraph learning.

The objective over a selection matrix ``Phi`` (m x m) and a hyperplane
``(w, b)`` is

    ||X^T - X^T Phi||_F^2 + lambda1 ||Phi||_{2,1} + lambda2 tr(Phi^T L Phi)
        + pi * (reg(w) + C sum_i hinge(y_i, w^T Phi^T x_i + b))

where ``X`` holds samples as columns. The outer loop refits the SVM on the
projected samples ``Phi^T x_i``; the inner loop alternates the box QP for the
hinge multipliers, the l2,1 reweighting, and the closed-form ``Phi`` update.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .dual import build_dual, inverse_system, solve_box_qp, system_matrix
from .svm import Hyperplane, fit_svm, hinge_loss

logger = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"divergence: non-finite objective at outer iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 0.1
    lambda2: float = 0.3
    pi: float = 1.0
    C: float = 1.0
    flavor: int = 2

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be nonnegative")
        if not (self.pi > 0 and self.C > 0):
            raise ValueError("pi and C must be positive")
        if self.flavor not in (1, 2):
            raise ValueError("flavor must be 1 or 2")

    @property
    def c_star(self) -> float:
        return self.pi * self.C


@dataclass(frozen=True)
class ConvergenceOpts:
    outer_tol: float = 1e-4
    inner_tol: float = 1e-4
    max_outer: int = 50
    max_inner: int = 30
    epsilon: float = 1e-8
    qp_tol: float = 1e-6
    qp_max_sweeps: int = 10_000
    svm_tol: float = 1e-8
    inverse_update: bool = True
    zero_rows: str = "prune"

    def __post_init__(self):
        if self.zero_rows not in ("prune", "unpenalized"):
            raise ValueError("zero_rows must be 'prune' or 'unpenalized'")


@dataclass
class SelectionState:
    phi: np.ndarray
    reweight: np.ndarray


@dataclass
class DslModel:
    selection: SelectionState
    hyperplane: Hyperplane
    hyper: Hyperparams
    trace: list = field(default_factory=list)
    converged: bool = False
    descent_violations: int = 0
    phi_unconstrained: np.ndarray | None = None

    @property
    def phi(self) -> np.ndarray:
        return self.selection.phi

    def to_dict(self) -> dict:
        return {
            "phi": self.selection.phi.tolist(),
            "reweight": self.selection.reweight.tolist(),
            "hyperplane": self.hyperplane.to_dict(),
            "hyperparams": asdict(self.hyper),
            "trace": self.trace,
            "converged": self.converged,
            "descent_violations": self.descent_violations,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DslModel":
        phi = np.asarray(d["phi"], dtype=np.float64)
        reweight = np.asarray(d.get("reweight", np.zeros(phi.shape[0])), dtype=np.float64)
        return cls(SelectionState(phi, reweight), Hyperplane.from_dict(d["hyperplane"]),
                   Hyperparams(**d["hyperparams"]), list(d.get("trace", [])),
                   bool(d.get("converged", False)), int(d.get("descent_violations", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DslModel":
        return cls.from_dict(json.loads(text))


def l21_norm(phi) -> float:
    """Sum of the Euclidean norms of the rows."""
    return float(np.linalg.norm(np.asarray(phi, dtype=np.float64), axis=1).sum())


def trace_smoothness(phi, L) -> float:
    """``tr(Phi^T L Phi)``."""
    phi = np.asarray(phi, dtype=np.float64)
    return float(np.einsum("ik,ik->", phi, np.asarray(L) @ phi))


def trace_smoothness_edges(phi, edges, weights) -> float:
    """Edge-sum form ``sum_k sum_(i,j) w_ij (Phi_ik - Phi_jk)^2``."""
    phi = np.asarray(phi, dtype=np.float64)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    diff = phi[edges[:, 0]] - phi[edges[:, 1]]
    return float(np.asarray(weights) @ (diff ** 2).sum(axis=1))


def reconstruction_error(phi, X) -> float:
    X = np.asarray(X, dtype=np.float64)
    return float(np.linalg.norm(X.T - X.T @ phi) ** 2)


def objective_terms(phi, h: Hyperplane, X, y, L, hp: Hyperparams) -> dict:
    """Individual terms of the full objective, already weighted."""
    phi = np.asarray(phi, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if phi.shape != (X.shape[0], X.shape[0]) or h.w.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch")
    scores = h.w @ (phi.T @ X) + h.b
    return {
        "reconstruction": reconstruction_error(phi, X),
        "l21": hp.lambda1 * l21_norm(phi),
        "smoothness": hp.lambda2 * trace_smoothness(phi, L),
        "margin": hp.pi * (h.regularizer() + hp.C * float(hinge_loss(y, scores).sum())),
    }


def objective(state, h: Hyperplane, X, y, L, hp: Hyperparams) -> float:
    """Full objective; ``state`` is a :class:`SelectionState` or a matrix."""
    phi = state.phi if isinstance(state, SelectionState) else state
    return sum(objective_terms(phi, h, X, y, L, hp).values())


def update_reweight(phi, epsilon: float = 1e-8) -> np.ndarray:
    """Diagonal ``1 / (2 ||Phi_i||)`` for rows with norm above ``epsilon``, else 0."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    norms = np.linalg.norm(np.asarray(phi, dtype=np.float64), axis=1)
    out = np.zeros_like(norms)
    big = norms > epsilon
    out[big] = 0.5 / norms[big]
    return out


def update_phi(X, y, w, alpha, reweight, lambda1, lambda2, L,
               M_inv: np.ndarray | None = None, XXt: np.ndarray | None = None) -> np.ndarray:
    """Closed-form minimizer ``0.5 M^{-1} (sum_i alpha_i y_i x_i w^T + 2 X X^T)``
    with ``M = X X^T + lambda1 D + lambda2 L``."""
    X = np.asarray(X, dtype=np.float64)
    for arr in (X, y, w, alpha, reweight):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite input to update_phi")
    if XXt is None:
        XXt = X @ X.T
    if M_inv is None:
        M_inv = inverse_system(system_matrix(XXt, reweight, lambda1, lambda2, L), XXt)
    u = X @ (np.asarray(alpha) * np.asarray(y))
    return M_inv @ XXt + 0.5 * np.outer(M_inv @ u, w)


def lagrangian(phi, xi, alpha, gamma, X, y, w, b, reweight, lambda1, lambda2, L, c_star) -> float:
    """Lagrangian of the slack form, with the l2,1 term replaced by its
    reweighted quadratic ``lambda1 tr(Phi^T D Phi)``."""
    phi = np.asarray(phi, dtype=np.float64)
    margins = y * (w @ (phi.T @ X) + b)
    return (reconstruction_error(phi, X)
            + lambda1 * float(np.einsum("ik,i,ik->", phi, reweight, phi))
            + lambda2 * trace_smoothness(phi, L)
            + c_star * float(np.sum(xi)) - float(gamma @ xi)
            - float(alpha @ (margins - 1.0 + xi)))


def lagrangian_gradient(phi, X, y, w, alpha, reweight, lambda1, lambda2, L) -> np.ndarray:
    """Analytic gradient of :func:`lagrangian` with respect to ``Phi``."""
    XXt = X @ X.T
    u = X @ (alpha * y)
    return (2.0 * (XXt @ phi - XXt) + 2.0 * lambda1 * reweight[:, None] * phi
            + 2.0 * lambda2 * (L @ phi) - np.outer(u, w))


def surrogate_primal(phi, X, y, w, b, reweight, lambda1, lambda2, L, c_star) -> float:
    """Slack-form objective at ``xi = hinge``, with the reweighted l2,1 term."""
    phi = np.asarray(phi, dtype=np.float64)
    xi = hinge_loss(y, w @ (phi.T @ X) + b)
    return (reconstruction_error(phi, X)
            + lambda1 * float(np.einsum("ik,i,ik->", phi, reweight, phi))
            + lambda2 * trace_smoothness(phi, L) + c_star * float(xi.sum()))


def inverse_with_diagonal_update(A_inv, d, A=None, breakdown: float = 1e-14) -> np.ndarray:
    """Inverse of ``A + diag(d)`` from ``A^{-1}`` by one Sherman-Morrison
    update per nonzero entry of ``d``.

    Falls back to direct inversion (of ``A`` if given, else of ``A_inv^{-1}``)
    when a denominator ``1 + d_i (A^{-1})_ii`` drops to ``breakdown``.
    """
    inv = np.array(A_inv, dtype=np.float64, copy=True)
    d = np.asarray(d, dtype=np.float64)
    for i in np.flatnonzero(d):
        col = inv[:, i].copy()
        denom = 1.0 + d[i] * col[i]
        if denom <= breakdown:
            logger.debug("Sherman-Morrison breakdown at index %d; refactorizing", i)
            base = np.linalg.inv(A_inv) if A is None else np.asarray(A, dtype=np.float64)
            return np.linalg.inv(base + np.diag(d))
        inv -= (d[i] / denom) * np.outer(col, inv[i, :])
    return 0.5 * (inv + inv.T)


class _SystemInverse:
    """Tracks ``(A + lambda1 diag(D))^{-1}`` across reweighting steps.

    Rows listed in ``frozen`` are pinned at zero: the returned matrix is the
    inverse of the active principal submatrix, zero-padded.
    """

    def __init__(self, XXt, L, lambda1, lambda2, use_update: bool):
        self.XXt = XXt
        self.lambda1 = lambda1
        self.A = XXt + lambda2 * L
        self.use_update = use_update
        m = XXt.shape[0]
        self.diag = np.zeros(m)
        self.inv = inverse_system(self.A, XXt) if use_update else None
        self.n_updates = 0
        self.n_refactor = 0

    def __call__(self, reweight, frozen=None) -> np.ndarray:
        target = self.lambda1 * np.asarray(reweight)
        if frozen is not None and frozen.any():
            active = ~frozen
            M = self.A[np.ix_(active, active)].copy()
            M[np.diag_indices_from(M)] += target[active]
            out = np.zeros_like(self.A)
            out[np.ix_(active, active)] = inverse_system(M, self.XXt)
            self.n_refactor += 1
            return out
        if self.use_update:
            change = target - self.diag
            if np.count_nonzero(change) <= self.A.shape[0] / 4:
                self.inv = inverse_with_diagonal_update(self.inv, change, A=self.A + np.diag(self.diag))
                self.diag = target
                self.n_updates += 1
                return self.inv
        M = self.A.copy()
        M[np.diag_indices_from(M)] += target
        inv = inverse_system(M, self.XXt)
        self.n_refactor += 1
        if self.use_update:
            self.inv, self.diag = inv, target
        return inv


def fit(X, y, L, hp: Hyperparams | None = None, opts: ConvergenceOpts | None = None,
        qp_callback=None, on_dual=None) -> DslModel:
    """Run the alternating minimization.

    Parameters
    ----------
    X : ndarray (m, n)
        Data matrix, samples as columns.
    y : ndarray (n,)
        Labels in {-1, +1}.
    L : ndarray (m, m)
        Graph Laplacian of the summary graph.
    hp, opts : hyperparameters and stopping rules.
        With ``opts.zero_rows == "prune"`` a row whose norm falls to
        ``epsilon`` is held at zero for the rest of the inner loop (the
        limit of an infinite reweighting entry); ``"unpenalized"`` leaves it
        free with a zero reweighting entry.
    qp_callback : callable, optional
        Receives every box-QP iterate ``alpha``.
    on_dual : callable, optional
        Called as ``on_dual(problem, solution)`` after every dual solve.

    Returns
    -------
    DslModel
        ``phi`` has its diagonal zeroed and the hyperplane is refit on
        ``phi^T x``; the pre-zeroing matrix is kept in ``phi_unconstrained``.
    """
    hp = hp or Hyperparams()
    opts = opts or ConvergenceOpts()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    L = np.asarray(L, dtype=np.float64)
    m, n = X.shape
    if y.shape[0] != n:
        raise ValueError(f"X has {n} samples but y has {y.shape[0]}")
    if L.shape != (m, m):
        raise ValueError(f"Laplacian must be {m}x{m}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(L))):
        raise ValueError("X and L must be finite")
    if not (np.any(y > 0) and np.any(y < 0)) or not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1/+1 with both classes present")

    XXt = X @ X.T
    sys_inv = _SystemInverse(XXt, L, hp.lambda1, hp.lambda2, opts.inverse_update)
    phi = np.eye(m)
    reweight = update_reweight(phi, opts.epsilon)
    alpha = np.zeros(n)
    trace = []
    converged = False
    violations = 0
    prev_obj = None
    h = None
    for outer in range(1, opts.max_outer + 1):
        h = fit_svm(phi.T @ X, y, hp.C, hp.flavor, tol=opts.svm_tol)
        gap = np.nan
        for inner in range(1, opts.max_inner + 1):
            reweight = update_reweight(phi, opts.epsilon)
            frozen = None
            if opts.zero_rows == "prune":
                frozen = np.linalg.norm(phi, axis=1) <= opts.epsilon
            M_inv = sys_inv(reweight, frozen)
            problem = build_dual(X, y, h.w, h.b, reweight, hp.lambda1, hp.lambda2, L,
                                 hp.c_star, M_inv=M_inv, XXt=XXt)
            sol = solve_box_qp(problem, alpha0=alpha, tol=opts.qp_tol,
                               max_sweeps=opts.qp_max_sweeps, callback=qp_callback,
                               check_concavity=False)
            alpha = sol.alpha
            if qp_callback is not None:
                qp_callback(alpha)
            if on_dual is not None:
                on_dual(problem, sol)
            new_phi = M_inv @ XXt + 0.5 * np.outer(M_inv @ (X @ (alpha * y)), h.w)
            if not np.all(np.isfinite(new_phi)):
                raise DivergenceError(outer)
            gap = surrogate_primal(new_phi, X, y, h.w, h.b, reweight, hp.lambda1, hp.lambda2,
                                   L, hp.c_star) - sol.dual_value
            change = np.linalg.norm(new_phi - phi) / max(np.linalg.norm(phi), 1e-300)
            phi = new_phi
            if change <= opts.inner_tol:
                break
        obj = objective(phi, h, X, y, L, hp)
        if not np.isfinite(obj):
            raise DivergenceError(outer)
        trace.append({"outer_iter": outer, "objective": obj, "gap": float(gap),
                      "inner_iters": inner})
        logger.debug("outer %d objective %.10g gap %.3g", outer, obj, gap)
        if prev_obj is not None:
            if obj > prev_obj * (1 + 1e-6) + 1e-12:
                violations += 1
                logger.warning("objective increased at outer iteration %d: %.10g -> %.10g",
                               outer, prev_obj, obj)
            if abs(prev_obj - obj) <= opts.outer_tol * max(abs(prev_obj), 1e-300):
                converged = True
                break
        prev_obj = obj

    unconstrained = phi.copy()
    final = phi.copy()
    np.fill_diagonal(final, 0.0)
    # refit so the returned hyperplane matches the returned (zero-diagonal) selection
    h = fit_svm(final.T @ X, y, hp.C, hp.flavor, tol=opts.svm_tol)
    return DslModel(SelectionState(final, update_reweight(phi, opts.epsilon)), h, hp, trace,
                    converged, violations, unconstrained)


def fit_dataset(data, hp: Hyperparams | None = None, opts: ConvergenceOpts | None = None,
                **kwargs) -> DslModel:
    """:func:`fit` on a :class:`~dslearn.data.Dataset`."""
    return fit(data.X, data.y, data.graph.laplacian, hp, opts, **kwargs)
