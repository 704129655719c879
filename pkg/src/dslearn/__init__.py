"""Discriminative subgraph learning via sparse self-representation."""

__version__ = "0.1.0"

from .data import Dataset, NetworkSample, SyntheticConfig, generate_synthetic, load_dataset, \
    save_dataset, stratified_folds
from .estimator import DSLClassifier
from .graph import SummaryGraph, build_summary_graph, conductance, generate_geometric_graph, \
    laplacian_matrix
from .metrics import EvalReport, FeatureRanking, auc_gt_recovery, cross_validate, rank_features
from .optimizer import ConvergenceOpts, DslModel, Hyperparams, fit, fit_dataset
from .svm import Hyperplane, LinearMarginSVC, fit_svm, hinge_loss

__all__ = [
    "ConvergenceOpts", "DSLClassifier", "Dataset", "DslModel", "EvalReport", "FeatureRanking",
    "Hyperparams", "Hyperplane", "LinearMarginSVC", "NetworkSample", "SummaryGraph",
    "SyntheticConfig", "auc_gt_recovery", "build_summary_graph", "conductance",
    "cross_validate", "fit", "fit_dataset", "fit_svm", "generate_geometric_graph",
    "generate_synthetic", "hinge_loss", "laplacian_matrix", "load_dataset", "rank_features",
    "save_dataset", "stratified_folds",
]
