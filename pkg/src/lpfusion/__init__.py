"""Locally adaptive lp-norm fusion of one-class classifier scores."""

__version__ = "0.1.0"

from .base_learners import BaseLearnerSpec, LearnerKind, fit_base_learner, score_samples
from .errors import (DataIOError, FusionError, InfeasiblePoint, InsufficientData, InvalidInput,
                     NumericalFailure, ParseError, RunFailed, UndefinedMetric)
from .evaluation import (RankTable, auc_pr, auc_roc, g_mean, select_threshold, skillings_mack)
from .experiment import (Dataset, ExperimentConfig, load_dataset, make_splits, predict_scores,
                         run_trial, run_trials, timing_ablation)
from .fusion import (FusionModel, LocalWeightSet, OptimizerConfig, fuse_scores,
                     optimize_frank_wolfe, optimize_interior_point)
from .kernels import KernelSpec, kernel_grid
from .model_io import load_model, save_model
from .scorespace import NormalizerState, ScoreMatrix, Stage

__all__ = [
    "BaseLearnerSpec", "DataIOError", "Dataset", "ExperimentConfig", "FusionError",
    "FusionModel", "InfeasiblePoint", "InsufficientData", "InvalidInput", "KernelSpec",
    "LearnerKind", "LocalWeightSet", "NormalizerState", "NumericalFailure", "OptimizerConfig",
    "ParseError", "RankTable", "RunFailed", "ScoreMatrix", "Stage", "UndefinedMetric",
    "auc_pr", "auc_roc", "fit_base_learner", "fuse_scores", "g_mean", "kernel_grid",
    "load_dataset", "load_model", "make_splits", "optimize_frank_wolfe",
    "optimize_interior_point", "predict_scores", "run_trial", "run_trials", "save_model",
    "score_samples", "select_threshold", "skillings_mack", "timing_ablation",
]
