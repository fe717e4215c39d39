from .knn import KNNModel, fit_knn, predict_knn
from .nn import NNModel, fit_nn
from .olr import ConvergenceWarning, OLRModel, fit_olr, predict_olr
from .pgm import PGMModel, bayes_decision, cost_matrix, fit_pgm, predict_pgm
from .tree import TreeModel, fit_tree, predict_tree

__all__ = [
    "ConvergenceWarning", "KNNModel", "NNModel", "OLRModel", "PGMModel", "TreeModel",
    "bayes_decision", "cost_matrix", "fit_knn", "fit_nn", "fit_olr", "fit_pgm", "fit_tree",
    "predict_knn", "predict_olr", "predict_pgm", "predict_tree",
]
