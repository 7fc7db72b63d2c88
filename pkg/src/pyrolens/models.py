"""Model kinds by name, fitting from hyperparameter dicts, and the JSON model bundle."""

from __future__ import annotations

import inspect
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .baselines import (KnnIndex, LinearModel, fit_elastic_net, fit_gini_tree_classifier, fit_knn, fit_lasso,
                        fit_linear, fit_logistic, fit_ridge)
from .data import FEATURES
from .ensemble import (ForestClassifier, ForestRegressor, GbdtClassifier, GbdtRegressor, SingleTreeModel,
                       fit_forest_classifier, fit_gbdt_classifier, fit_gbdt_regressor, fit_random_forest)
from .errors import ConfigError, VersionError
from .tree import DecisionTree

BUNDLE_FORMAT = "pyrolens-model"
BUNDLE_VERSION = 1


@dataclass(frozen=True)
class KindSpec:
    name: str
    task: str
    fitter: Callable
    defaults: dict
    space: str

    @property
    def accepted(self) -> set:
        sig = inspect.signature(self.fitter)
        return {p for p in sig.parameters if p not in ("X", "y", "seed")}

    def resolve(self, params: dict | None) -> dict:
        """Defaults overlaid with ``params``; unknown names are a config error."""
        params = dict(params or {})
        for key in sorted(params):
            if key not in self.accepted:
                raise ConfigError(f"model kind {self.name!r} has no hyperparameter {key!r}", key=key)
        return {**self.defaults, **params}

    def fit(self, X, y, params: dict | None = None, seed: int = 0):
        kw = self.resolve(params)
        if "seed" in inspect.signature(self.fitter).parameters:
            kw["seed"] = seed
        return self.fitter(X, y, **kw)


def _logistic(X, y, C: float = 1.0, penalty: str = "l2", solver: str | None = None, max_iter: int = 2000,
              tol: float = 1e-6):
    return fit_logistic(X, y, penalty=penalty, C=C, max_iter=max_iter, tol=tol, solver=solver)


def _knn(X, y, n_neighbors: int = 5, p: int = 2):
    return fit_knn(X, y, n_neighbors=n_neighbors, p=p)


def _linear(X, y, fit_intercept: bool = True):
    return fit_linear(X, y, fit_intercept=fit_intercept)


def _ridge(X, y, alpha: float = 1.0):
    return fit_ridge(X, y, alpha)


def _lasso(X, y, alpha: float = 1.0):
    return fit_lasso(X, y, alpha)


def _elasticnet(X, y, alpha: float = 1.0, l1_ratio: float = 0.5):
    return fit_elastic_net(X, y, alpha, l1_ratio)


# defaults are the tuned values for each kind; regression ones are from the inside-area run
KINDS = {k.name: k for k in (
    KindSpec("gbdt", "classification", fit_gbdt_classifier,
             {"learning_rate": 0.1140, "max_depth": 3, "n_estimators": 140}, "table1:Xgboost"),
    KindSpec("gbdt-reg", "regression", fit_gbdt_regressor,
             {"learning_rate": 0.12287608582119026, "max_depth": 5, "n_estimators": 96}, "table3:Xgboost"),
    KindSpec("forest-reg", "regression", fit_random_forest,
             {"max_depth": 18, "min_samples_split": 3, "n_estimators": 64}, "table3:RandomForest"),
    KindSpec("forest-clf", "classification", fit_forest_classifier,
             {"max_depth": 14, "min_samples_split": 8, "n_estimators": 94}, "table1:RandomForest"),
    KindSpec("logistic", "classification", _logistic,
             {"C": 0.7756, "penalty": "l2", "solver": "lbfgs"}, "table1:Logistic Regression"),
    KindSpec("knn", "classification", _knn, {"n_neighbors": 7, "p": 2}, "table1:KNN"),
    KindSpec("dtree", "classification", fit_gini_tree_classifier,
             {"max_depth": 14, "min_samples_split": 8}, "table1:DecisionTree"),
    KindSpec("linear", "regression", _linear, {"fit_intercept": True}, "table3:Linear Regression"),
    KindSpec("ridge", "regression", _ridge, {"alpha": 0.16994636371262764}, "table3:Ridge Regression"),
    KindSpec("lasso", "regression", _lasso, {"alpha": 3.2521088005944945}, "table3:Lasso Regression"),
    KindSpec("elasticnet", "regression", _elasticnet,
             {"alpha": 0.2160217783087772, "l1_ratio": 0.8349780173355017}, "table3:ElasticNet"),
)}


def get_kind(name: str) -> KindSpec:
    try:
        return KINDS[name]
    except KeyError:
        raise ConfigError(f"unknown model kind {name!r}; choose from {', '.join(KINDS)}", key="kind") from None


def fit_model(kind: str, X, y, params: dict | None = None, seed: int = 0):
    return get_kind(kind).fit(X, y, params, seed)


# ---------------------------------------------------------------------------
# bundles


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a, dtype=np.float64).reshape(-1)]


def _model_body(model) -> dict:
    if isinstance(model, (GbdtClassifier, GbdtRegressor)):
        return {"base_score": float(model.base_score), "learning_rate": float(model.learning_rate),
                "max_depth": int(model.max_depth), "n_features": int(model.n_features),
                "trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, ForestRegressor):
        return {"max_depth": model.max_depth, "min_samples_split": int(model.min_samples_split),
                "max_features": int(model.max_features), "seed": int(model.seed), "bootstrap": bool(model.bootstrap),
                "n_features": int(model.n_features), "trees": [t.to_dict() for t in model.trees]}
    if isinstance(model, SingleTreeModel):
        return {"n_features": int(model.n_features), "tree": model.tree.to_dict()}
    if isinstance(model, LinearModel):
        return {"intercept": float(model.intercept), "coefficients": _floats(model.coefficients),
                "penalty": dict(model.penalty), "link": model.link, "converged": bool(model.converged),
                "n_iter": int(model.n_iter)}
    if isinstance(model, KnnIndex):
        return {"k": int(model.k), "p": int(model.p), "mean": _floats(model.mean), "std": _floats(model.std),
                "degenerate": [bool(v) for v in model.degenerate], "labels": _floats(model.labels),
                "points": [_floats(row) for row in model.Z]}
    raise ConfigError(f"cannot serialize {type(model).__name__}")


def model_kind(model) -> str:
    return model.kind


def to_bundle(model, params: dict | None = None, *, target: str = "", seed: int = 0,
              features=FEATURES) -> dict:
    kind = model_kind(model)
    return {"format": BUNDLE_FORMAT, "version": BUNDLE_VERSION, "kind": kind, "task": get_kind(kind).task,
            "target": target, "features": list(features), "seed": int(seed),
            "params": dict(params if params is not None else getattr(model, "params", {})),
            "model": _model_body(model)}


def from_bundle(doc: dict):
    if not isinstance(doc, dict) or doc.get("format") != BUNDLE_FORMAT:
        raise ConfigError("not a model bundle", key="format")
    if doc.get("version") != BUNDLE_VERSION:
        raise VersionError(f"unsupported model bundle version {doc.get('version')!r}")
    kind = doc.get("kind")
    get_kind(kind)
    body = doc["model"]
    params = dict(doc.get("params", {}))
    if kind in ("gbdt", "gbdt-reg"):
        trees = [DecisionTree.from_dict(t) for t in body["trees"]]
        cls = GbdtClassifier if kind == "gbdt" else GbdtRegressor
        return cls(body["base_score"], trees, body["learning_rate"], len(trees), body["max_depth"],
                   body["n_features"], params)
    if kind in ("forest-reg", "forest-clf"):
        trees = [DecisionTree.from_dict(t) for t in body["trees"]]
        cls = ForestRegressor if kind == "forest-reg" else ForestClassifier
        return cls(trees, len(trees), body["max_depth"], body["min_samples_split"], body["max_features"],
                   body["seed"], body["bootstrap"], body["n_features"], params)
    if kind == "dtree":
        return SingleTreeModel(DecisionTree.from_dict(body["tree"]), body["n_features"], params)
    if kind == "knn":
        return KnnIndex(np.asarray(body["points"], dtype=np.float64).reshape(-1, len(body["mean"])),
                        np.asarray(body["labels"]), body["k"], body["p"], np.asarray(body["mean"]),
                        np.asarray(body["std"]), np.asarray(body["degenerate"], dtype=bool))
    return LinearModel(body["intercept"], np.asarray(body["coefficients"]), body["penalty"], body["link"],
                       body["converged"], body["n_iter"], [], kind)


def dumps_json(doc) -> str:
    """Canonical JSON text: two-space indent, shortest round-trip floats, trailing newline."""
    return json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def save_bundle(doc: dict, path) -> None:
    Path(path).write_text(dumps_json(doc), encoding="utf-8")


def load_bundle(path) -> tuple[object, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return from_bundle(doc), doc
