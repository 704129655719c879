"""scikit-learn estimator wrapping the alternating DSL solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .graph import SummaryGraph, laplacian_matrix
from .optimizer import ConvergenceOpts, Hyperparams, fit as dsl_fit


def _laplacian_for(graph, n_features: int) -> np.ndarray:
    if graph is None:
        return np.zeros((n_features, n_features))
    L = laplacian_matrix(graph) if isinstance(graph, SummaryGraph) else np.asarray(graph, dtype=np.float64)
    if L.shape != (n_features, n_features):
        raise ValueError(f"graph has {L.shape[0]} nodes but X has {n_features} features")
    return L


class DSLClassifier(SelectorMixin, ClassifierMixin, BaseEstimator):
    """Discriminative subgraph learner.

    Learns a row-sparse, graph-smooth self-representation ``phi_`` of the
    features together with a max-margin hyperplane on the projected samples.
    Features are ranked by the Euclidean norm of their row in ``phi_``.

    Parameters
    ----------
    graph : SummaryGraph or ndarray of shape (n_features, n_features), default=None
        Feature graph, or its Laplacian. ``None`` disables the smoothness term.
    lambda1 : float, default=0.1
        Weight of the l2,1 row-sparsity penalty.
    lambda2 : float, default=0.3
        Weight of the graph smoothness penalty.
    pi : float, default=1.0
        Weight of the margin term.
    C : float, default=1.0
        Hinge-loss weight inside the margin term.
    flavor : {1, 2}, default=2
        Margin regularizer: ``||w||_1`` or ``0.5 ||w||_2^2``.
    n_features_to_select : int, default=None
        Features kept by ``transform``. ``None`` keeps every feature whose
        score exceeds ``threshold``.
    threshold : float, default=1e-6
    outer_tol, inner_tol, max_outer, max_inner, epsilon : see ``ConvergenceOpts``.
    inverse_update : bool, default=True
        Reuse the system inverse through rank-one updates where cheap.
    zero_rows : {"prune", "unpenalized"}, default="prune"

    Attributes
    ----------
    phi_ : ndarray of shape (n_features, n_features)
        Selection matrix with zero diagonal.
    hyperplane_ : Hyperplane
    scores_ : ndarray of shape (n_features,)
    ranking_ : ndarray of shape (n_features,)
        Feature indices by decreasing score, ties by index.
    model_ : DslModel
    """

    def __init__(self, graph=None, lambda1=0.1, lambda2=0.3, pi=1.0, C=1.0, flavor=2,
                 n_features_to_select=None, threshold=1e-6, outer_tol=1e-4, inner_tol=1e-4,
                 max_outer=50, max_inner=30, epsilon=1e-8, inverse_update=True,
                 zero_rows="prune"):
        self.graph = graph
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.pi = pi
        self.C = C
        self.flavor = flavor
        self.n_features_to_select = n_features_to_select
        self.threshold = threshold
        self.outer_tol = outer_tol
        self.inner_tol = inner_tol
        self.max_outer = max_outer
        self.max_inner = max_inner
        self.epsilon = epsilon
        self.inverse_update = inverse_update
        self.zero_rows = zero_rows

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(self.lambda1, self.lambda2, self.pi, self.C, self.flavor)

    def _opts(self) -> ConvergenceOpts:
        return ConvergenceOpts(outer_tol=self.outer_tol, inner_tol=self.inner_tol,
                               max_outer=self.max_outer, max_inner=self.max_inner,
                               epsilon=self.epsilon, inverse_update=self.inverse_update,
                               zero_rows=self.zero_rows)

    def fit(self, X, y):
        """Fit on ``X`` of shape (n_samples, n_features)."""
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise ValueError("DSLClassifier needs exactly two classes")
        ypm = np.where(y == self.classes_[1], 1.0, -1.0)
        L = _laplacian_for(self.graph, X.shape[1])
        self.model_ = dsl_fit(X.T, ypm, L, self._hyperparams(), self._opts())
        self.phi_ = self.model_.phi
        self.hyperplane_ = self.model_.hyperplane
        self.scores_ = np.linalg.norm(self.phi_, axis=1)
        self.ranking_ = np.lexsort((np.arange(len(self.scores_)), -self.scores_))
        self.trace_ = self.model_.trace
        self.converged_ = self.model_.converged
        self.n_iter_ = len(self.trace_)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return (X @ self.phi_) @ self.hyperplane_.w + self.hyperplane_.b

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])

    def _get_support_mask(self):
        check_is_fitted(self)
        mask = np.zeros(self.n_features_in_, dtype=bool)
        if self.n_features_to_select is None:
            mask[self.scores_ > self.threshold] = True
        else:
            k = int(self.n_features_to_select)
            if not 1 <= k <= self.n_features_in_:
                raise ValueError(f"n_features_to_select must be in [1, {self.n_features_in_}]")
            mask[self.ranking_[:k]] = True
        return mask
