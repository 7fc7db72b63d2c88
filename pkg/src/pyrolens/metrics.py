"""Classification/regression scores and the multi-task training losses.

Zero denominators never raise: the affected metric is reported as 0 and its
name is listed in ``MetricReport.degenerate``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

PROB_EPS = 1e-12

METRIC_NAMES = ("accuracy", "precision", "recall", "f1", "mae", "mse", "rmse", "r2",
                "l_cls", "l_reg", "l_total")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricReport:
    values: dict = field(default_factory=dict)
    degenerate: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.values[name]

    def __getattr__(self, name):
        if name in METRIC_NAMES:
            try:
                return self.values[name]
            except KeyError:
                pass
        raise AttributeError(name)

    def merged(self, other: "MetricReport") -> "MetricReport":
        return MetricReport({**self.values, **other.values}, sorted(set(self.degenerate) | set(other.degenerate)))

    def to_json(self) -> dict:
        out = {k: float(self.values[k]) for k in METRIC_NAMES if k in self.values}
        out["degenerate"] = sorted(self.degenerate)
        return out


def _labels(v, name):
    a = np.asarray(v)
    if a.ndim != 1:
        raise ArgumentError(f"{name} must be a vector")
    if not np.all((a == 0) | (a == 1)):
        raise ArgumentError(f"{name} must contain only 0/1 labels")
    return a.astype(np.int64)


def confusion(y, y_hat) -> ConfusionCounts:
    """Counts with 1 (unsafe) as the positive class."""
    y = _labels(y, "y")
    y_hat = _labels(y_hat, "y_hat")
    if len(y) != len(y_hat):
        raise ArgumentError(f"length mismatch: {len(y)} labels vs {len(y_hat)} predictions")
    if len(y) == 0:
        raise ArgumentError("need at least one pair")
    return ConfusionCounts(
        tp=int(np.sum((y == 1) & (y_hat == 1))),
        fp=int(np.sum((y == 0) & (y_hat == 1))),
        tn=int(np.sum((y == 0) & (y_hat == 0))),
        fn=int(np.sum((y == 1) & (y_hat == 0))),
    )


def _ratio(num, den, name, degenerate):
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def classification_metrics(c: ConfusionCounts) -> MetricReport:
    if c.total <= 0:
        raise ArgumentError("confusion counts are empty")
    deg: list = []
    acc = (c.tp + c.tn) / c.total
    recall = _ratio(c.tp, c.tp + c.fn, "recall", deg)
    precision = _ratio(c.tp, c.tp + c.fp, "precision", deg)
    if "recall" in deg or "precision" in deg or precision + recall == 0:
        f1 = 0.0
        deg.append("f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricReport({"accuracy": acc, "precision": precision, "recall": recall, "f1": f1}, deg)


def regression_metrics(y, y_hat) -> MetricReport:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape or y.ndim != 1:
        raise ArgumentError("y and y_hat must be vectors of equal length")
    if len(y) < 2:
        raise ArgumentError("regression metrics need at least two points")
    resid = y - y_hat
    mae = float(np.mean(np.abs(resid)))
    mse = float(np.mean(resid * resid))
    rmse = math.sqrt(mse)
    rss = float(np.sum(resid * resid))
    centered = y - y.mean()
    tss = float(np.sum(centered * centered))
    deg = []
    if tss == 0 or np.all(y == y[0]):
        r2 = 0.0
        deg.append("r2")
    else:
        r2 = 1.0 - rss / tss
    return MetricReport({"mae": mae, "mse": mse, "rmse": rmse, "r2": r2}, deg)


def binary_cross_entropy(y, p) -> float:
    """Mean log loss with probabilities clamped to [eps, 1-eps]."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape:
        raise ArgumentError("labels and probabilities must have equal length")
    if len(y) == 0:
        raise ArgumentError("need at least one point")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ArgumentError("probabilities must lie in [0, 1]")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def mean_squared_error(y, y_hat) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ArgumentError("y and y_hat must have equal length")
    if len(y) == 0:
        raise ArgumentError("need at least one point")
    r = y - y_hat
    return float(np.mean(r * r))


def multitask_losses(y_cls, p_cls, y_reg, y_reg_hat, lam: float) -> dict:
    """``l_cls`` (log loss), ``l_reg`` (MSE) and ``l_total = l_cls + lam * l_reg``."""
    if lam < 0:
        raise ArgumentError("lambda must be non-negative")
    l_cls = binary_cross_entropy(y_cls, p_cls)
    l_reg = mean_squared_error(y_reg, y_reg_hat)
    return {"l_cls": l_cls, "l_reg": l_reg, "l_total": l_cls + lam * l_reg}
