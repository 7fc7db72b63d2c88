"""Tree ensembles, Bayesian tuning and exact explanations for prescribed-fire tabular data."""

from .baselines import (fit_elastic_net, fit_gini_tree_classifier, fit_knn, fit_lasso, fit_linear, fit_logistic,
                        fit_ridge, fit_weighted_least_squares)
from .data import FEATURES, TARGETS, Dataset, GeneratorSpec, load_csv, pearson_correlation, synthesize, \
    train_test_split, write_csv
from .ensemble import fit_forest_classifier, fit_gbdt_classifier, fit_gbdt_regressor, fit_random_forest
from .hpo import bayes_optimize, cv_objective, expected_improvement, gp_posterior, random_search
from .metrics import classification_metrics, confusion, multitask_losses, regression_metrics
from .models import fit_model, from_bundle, load_bundle, to_bundle
from .tree import DecisionTree, feature_importance, fit_boosted_tree, fit_cart_regression
from .xai import brute_force_shapley, lime_explain, pdp, tree_shap, tree_shap_values

__version__ = "0.1.0"

__all__ = [
    "FEATURES", "TARGETS", "Dataset", "DecisionTree", "GeneratorSpec", "bayes_optimize", "brute_force_shapley",
    "classification_metrics", "confusion", "cv_objective", "expected_improvement", "feature_importance",
    "fit_boosted_tree", "fit_cart_regression", "fit_elastic_net", "fit_forest_classifier", "fit_gbdt_classifier",
    "fit_gbdt_regressor", "fit_gini_tree_classifier", "fit_knn", "fit_lasso", "fit_linear", "fit_logistic",
    "fit_model", "fit_random_forest", "fit_ridge", "fit_weighted_least_squares", "from_bundle", "gp_posterior",
    "lime_explain", "load_bundle", "load_csv", "multitask_losses", "pdp", "pearson_correlation", "random_search",
    "regression_metrics", "synthesize", "to_bundle", "train_test_split", "tree_shap", "tree_shap_values",
    "write_csv",
]
