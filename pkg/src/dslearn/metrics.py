"""Feature ranking, ground-truth recovery, cross-validation and subgraph quality."""

from __future__ import annotations

import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import roc_auc_score, roc_curve

from .data import Dataset, stratified_folds
from .graph import SummaryGraph, conductance, connected_components
from .optimizer import ConvergenceOpts, Hyperparams, fit as dsl_fit
from .svm import LinearMarginSVC


@dataclass(frozen=True)
class FeatureRanking:
    scores: np.ndarray
    order: np.ndarray

    def top(self, k: int) -> np.ndarray:
        return self.order[:k]


@dataclass
class EvalReport:
    accuracy: float
    per_fold: list
    k_selected: int
    auc: float | None = None
    conductance: float | None = None
    n_components: int | None = None
    selected: list = field(default_factory=list)
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def rank_features(phi) -> FeatureRanking:
    """Rank features by the Euclidean norm of their row of ``phi``; ties go to
    the smaller index."""
    scores = np.linalg.norm(np.asarray(phi, dtype=np.float64), axis=1)
    order = np.lexsort((np.arange(len(scores)), -scores))
    return FeatureRanking(scores, order)


def _gt_labels(n: int, gt_nodes) -> np.ndarray:
    gt = {int(v) for v in gt_nodes}
    if not gt or len(gt) >= n:
        raise ValueError("ground-truth set must be a nonempty strict subset")
    labels = np.zeros(n, dtype=int)
    labels[list(gt)] = 1
    return labels


def auc_gt_recovery(scores, gt_nodes) -> float:
    """Probability that a ground-truth node outscores a non-ground-truth one
    (ties count one half)."""
    scores = np.asarray(scores, dtype=np.float64)
    return float(roc_auc_score(_gt_labels(len(scores), gt_nodes), scores))


def roc_points(scores, gt_nodes) -> tuple[np.ndarray, np.ndarray]:
    fpr, tpr, _ = roc_curve(_gt_labels(len(scores), gt_nodes), np.asarray(scores, dtype=np.float64))
    return fpr, tpr


def subgraph_report(graph: SummaryGraph, selected_nodes) -> dict:
    """Conductance and number of connected components of the induced subgraph."""
    return {"conductance": conductance(graph, selected_nodes),
            "n_components": len(connected_components(graph, selected_nodes))}


def variance_scores(X) -> np.ndarray:
    """Per-feature variance across samples; a graph-agnostic ranking control."""
    return np.var(np.asarray(X, dtype=np.float64), axis=1)


def n_workers() -> int:
    env = os.environ.get("DSL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_fold(data: Dataset, train, test, hp, opts, k_features) -> tuple[float, list]:
    if np.intersect1d(train, test).size:
        raise AssertionError("training and held-out indices overlap")
    model = dsl_fit(data.X[:, train], data.y[train], data.graph.laplacian, hp, opts)
    selected = rank_features(model.phi).top(k_features)
    clf = LinearMarginSVC(C=1.0, flavor=2)
    clf.fit(data.X[np.ix_(selected, train)].T, data.y[train])
    acc = float(np.mean(clf.predict(data.X[np.ix_(selected, test)].T) == data.y[test]))
    return acc, selected.tolist()


def cross_validate(data: Dataset, hp: Hyperparams, k_features: int, n_folds: int = 5,
                   seed: int = 0, opts: ConvergenceOpts | None = None, gt_nodes=None,
                   n_jobs: int | None = None) -> EvalReport:
    """Stratified k-fold accuracy of a C=1 linear SVM trained on the raw
    values of the top ``k_features`` features chosen by DSL on each training
    split.

    The full-data selection is also fitted to report conductance and, when
    ``gt_nodes`` is given, ground-truth recovery AUC.
    """
    m = data.n_features
    if not 1 <= k_features <= m:
        raise ValueError(f"k_features must be in [1, {m}]")
    opts = opts or ConvergenceOpts()
    start = time.perf_counter()
    folds = stratified_folds(data.y, n_folds, seed)
    everything = np.arange(data.n_samples)
    jobs = [(np.setdiff1d(everything, test), test) for test in folds]
    n_jobs = n_workers() if n_jobs is None else n_jobs
    results = Parallel(n_jobs=min(n_jobs, len(jobs)))(
        delayed(_run_fold)(data, train, test, hp, opts, k_features) for train, test in jobs)
    per_fold = [acc for acc, _ in results]

    full = dsl_fit(data.X, data.y, data.graph.laplacian, hp, opts)
    ranking = rank_features(full.phi)
    selected = ranking.top(k_features)
    report = EvalReport(accuracy=float(np.mean(per_fold)), per_fold=per_fold,
                        k_selected=k_features, selected=selected.tolist())
    if gt_nodes is not None:
        report.auc = auc_gt_recovery(ranking.scores, gt_nodes)
    if k_features < m:
        try:
            sub = subgraph_report(data.graph, selected)
            report.conductance, report.n_components = sub["conductance"], sub["n_components"]
        except ValueError:
            pass
    report.wall_time = time.perf_counter() - start
    return report
