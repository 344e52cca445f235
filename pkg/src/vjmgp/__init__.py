"""Multi-tree GP feature construction with a vicinal Jensen gap regularizer."""

from .evolve import Archive, RunConfig, RunTrace, run
from .exprcore import ExprTree, Individual, construct_features, evaluate_tree, parse
from .ridge import RidgeReadout, fit_ridge, loocv_errors
from .vicinal import VicinalConfig, VicinalSet, synthesize

__all__ = [
    "Archive", "RunConfig", "RunTrace", "run",
    "ExprTree", "Individual", "construct_features", "evaluate_tree", "parse",
    "RidgeReadout", "fit_ridge", "loocv_errors",
    "VicinalConfig", "VicinalSet", "synthesize",
]
