"""Tuning-parameter selection for series regression and l1-penalised estimators."""

from .basis import MONOMIAL, SPLINE, BasisSpec, design_matrix, eval_basis
from .dataset import DataError, Dataset, load_table, normalize_columns, save_table, within_transform
from .lasso import LassoFit, SolverConfig, lasso_fit, logit_penalized_fit
from .mc import DgpSpec, McConfig, McReport, run_table1, simulate_dataset
from .select_lambda import (LambdaResult, bcch_lambda, bootstrap_lambda, brt_lambda,
                            cluster_bcch_lambda, cv_lambda, glm_bootstrap_after_cv_lambda,
                            panel_bcch_lambda, quantile_pivotal_lambda, sure_lambda)
from .select_series import (SelectorResult, aggregate_predictor, lepski_select, loo_select,
                            mallows_select, penalized_model_select, stein_select,
                            validation_select, vfold_select)
from .series import SeriesFit, error_metrics, fit_series, hetero_trace

__version__ = "0.1.0"
