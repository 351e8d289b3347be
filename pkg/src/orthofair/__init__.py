"""Orthogonal-to-bias pre-processing for counterfactually fair prediction."""

from .datagen import ContYParams, Dataset, LoanParams, counterfactual_loan, gen_cont_y, gen_loan
from .matrix import DataMatrix, StandardizationParams, SvdResult, least_squares, soft_threshold, standardize, truncated_svd, unstandardize
from .metrics import MetricsReport, aa_gap, acc_auc, avg_pairwise_corr, cf_metric, eo_gap, kl_observed_vs_counterfactual, modification_norm, rmse
from .ob import FactorPair, ObConfig, apply_transform, fit_ob, lemma_gap_diagnostic, transform
from .predictors import EmpiricalBDistribution, Predictor, average_over_b, fit_linear, fit_logistic, predict_score
from .sob import SobConfig, SobResult, fit_sob, select_theta

__version__ = "0.1.0"

__all__ = [
    "ContYParams",
    "DataMatrix",
    "Dataset",
    "EmpiricalBDistribution",
    "FactorPair",
    "LoanParams",
    "MetricsReport",
    "ObConfig",
    "Predictor",
    "SobConfig",
    "SobResult",
    "StandardizationParams",
    "SvdResult",
    "aa_gap",
    "acc_auc",
    "apply_transform",
    "average_over_b",
    "avg_pairwise_corr",
    "cf_metric",
    "counterfactual_loan",
    "eo_gap",
    "fit_linear",
    "fit_logistic",
    "fit_ob",
    "fit_sob",
    "gen_cont_y",
    "gen_loan",
    "kl_observed_vs_counterfactual",
    "least_squares",
    "lemma_gap_diagnostic",
    "modification_norm",
    "predict_score",
    "rmse",
    "select_theta",
    "soft_threshold",
    "standardize",
    "transform",
    "truncated_svd",
    "unstandardize",
]
