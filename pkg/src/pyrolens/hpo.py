"""Bayesian hyperparameter optimization: typed search spaces, a GP surrogate
with expected improvement, random search, and a k-fold validation objective.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np
from scipy.special import ndtr

from .errors import ArgumentError, ConfigError, DegenerateError

POOL_SIZE = 512
_JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class ParamSpec:
    kind: str
    low: float | None = None
    high: float | None = None
    prior: str = "uniform"
    choices: tuple = ()

    def __post_init__(self):
        if self.kind == "real":
            if self.prior not in ("uniform", "log-uniform"):
                raise ConfigError(f"unknown prior {self.prior!r}", key="prior")
            if self.low is None or self.high is None or not self.low < self.high:
                raise ConfigError("real parameters need low < high", key="low")
            if self.prior == "log-uniform" and not self.low > 0:
                raise ConfigError("log-uniform parameters need low > 0", key="low")
        elif self.kind == "integer":
            if self.low is None or self.high is None or not self.low < self.high:
                raise ConfigError("integer parameters need low < high", key="low")
            if int(self.low) != self.low or int(self.high) != self.high:
                raise ConfigError("integer bounds must be integral", key="low")
        elif self.kind == "categorical":
            if len(self.choices) == 0:
                raise ConfigError("categorical parameters need at least one choice", key="choices")
            if len(set(map(_choice_key, self.choices))) != len(self.choices):
                raise ConfigError("categorical choices must be unique", key="choices")
        else:
            raise ConfigError(f"unknown parameter kind {self.kind!r}", key="kind")

    @property
    def dim(self) -> int:
        return len(self.choices) if self.kind == "categorical" else 1

    def to_json(self) -> dict:
        if self.kind == "categorical":
            return {"kind": "categorical", "choices": list(self.choices)}
        d = {"kind": self.kind, "low": _num(self.low), "high": _num(self.high)}
        if self.kind == "real":
            d["prior"] = self.prior
        return d


def _num(v):
    return int(v) if float(v).is_integer() and not isinstance(v, float) else v


def _choice_key(c):
    # keep True and 1 distinct
    return (type(c).__name__, c)


@dataclass(frozen=True)
class SearchSpace:
    params: dict

    def __post_init__(self):
        if not self.params:
            raise ConfigError("search space is empty")

    @property
    def names(self) -> list[str]:
        return list(self.params)

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.params.values())

    def to_json(self) -> dict:
        return {name: spec.to_json() for name, spec in self.params.items()}


_ALLOWED = {"real": {"kind", "low", "high", "prior"}, "integer": {"kind", "low", "high"},
            "categorical": {"kind", "choices"}}


def parse_space(doc: dict) -> SearchSpace:
    """Build a space from ``{name: {kind, low, high, prior} | {kind, choices}}``."""
    if not isinstance(doc, dict) or not doc:
        raise ConfigError("search space must be a non-empty JSON object")
    out = {}
    for name, body in doc.items():
        if not isinstance(body, dict):
            raise ConfigError(f"parameter {name!r} must be an object", key=name)
        kind = body.get("kind")
        if kind not in _ALLOWED:
            raise ConfigError(f"parameter {name!r}: unknown kind {kind!r}", key=f"{name}.kind")
        extra = set(body) - _ALLOWED[kind]
        if extra:
            bad = sorted(extra)[0]
            raise ConfigError(f"parameter {name!r}: unexpected key {bad!r}", key=f"{name}.{bad}")
        try:
            if kind == "categorical":
                if not isinstance(body.get("choices"), list):
                    raise ConfigError("choices must be a list", key="choices")
                spec = ParamSpec("categorical", choices=tuple(body["choices"]))
            else:
                for k in ("low", "high"):
                    v = body.get(k)
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ConfigError(f"{k} must be a number", key=k)
                spec = ParamSpec(kind, body["low"], body["high"], body.get("prior", "uniform"))
        except ConfigError as exc:
            raise ConfigError(f"parameter {name!r}: {exc}", key=f"{name}.{exc.key}" if exc.key else name) from None
        out[name] = spec
    return SearchSpace(out)


def load_preset(name: str) -> dict:
    with resources.files("pyrolens.presets").joinpath(f"{name}.json").open(encoding="utf-8") as fh:
        return json.load(fh)


PRESET_TABLES = {"table1": "table1_classification_space", "table3": "table3_regression_space"}


def resolve_space(ref: str) -> SearchSpace:
    """A space from a JSON file path or a ``table1:<Model>`` / ``table3:<Model>`` preset."""
    head, sep, model = ref.partition(":")
    if sep and head in PRESET_TABLES:
        table = load_preset(PRESET_TABLES[head])
        if model not in table:
            raise ConfigError(f"preset {head!r} has no model {model!r}; choose from {sorted(table)}", key=model)
        return parse_space(table[model])
    path = Path(ref)
    try:
        with path.open(encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_space(doc)


def validate_params(space: SearchSpace, params: dict) -> None:
    """Raise :class:`ConfigError` naming the first key that is missing or out of range."""
    for name, spec in space.params.items():
        if name not in params:
            raise ConfigError(f"missing parameter {name!r}", key=name)
        v = params[name]
        if spec.kind == "categorical":
            if _choice_key(v) not in {_choice_key(c) for c in spec.choices}:
                raise ConfigError(f"{name}={v!r} is not one of {list(spec.choices)}", key=name)
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
                raise ConfigError(f"{name}={v!r} is not numeric", key=name)
            if spec.kind == "integer" and int(v) != v:
                raise ConfigError(f"{name}={v!r} is not an integer", key=name)
            if not spec.low <= v <= spec.high:
                raise ConfigError(f"{name}={v!r} outside [{spec.low}, {spec.high}]", key=name)
    extra = set(params) - set(space.params)
    if extra:
        bad = sorted(extra)[0]
        raise ConfigError(f"unknown parameter {bad!r}", key=bad)


def sample(space: SearchSpace, rng: np.random.Generator) -> dict:
    out = {}
    for name, spec in space.params.items():
        if spec.kind == "real":
            if spec.prior == "log-uniform":
                out[name] = float(math.exp(rng.uniform(math.log(spec.low), math.log(spec.high))))
            else:
                out[name] = float(rng.uniform(spec.low, spec.high))
        elif spec.kind == "integer":
            out[name] = int(rng.integers(int(spec.low), int(spec.high) + 1))
        else:
            out[name] = spec.choices[int(rng.integers(len(spec.choices)))]
    return out


def encode(space: SearchSpace, params: dict) -> np.ndarray:
    """Map params into the unit cube; categoricals become one-hot blocks."""
    validate_params(space, params)
    parts = []
    for name, spec in space.params.items():
        v = params[name]
        if spec.kind == "real" and spec.prior == "log-uniform":
            lo, hi = math.log(spec.low), math.log(spec.high)
            parts.append((math.log(v) - lo) / (hi - lo))
        elif spec.kind in ("real", "integer"):
            parts.append((v - spec.low) / (spec.high - spec.low))
        else:
            hot = [0.0] * len(spec.choices)
            for i, c in enumerate(spec.choices):
                if _choice_key(c) == _choice_key(v):
                    hot[i] = 1.0
            parts.extend(hot)
    return np.asarray(parts, dtype=np.float64)


def decode(space: SearchSpace, point) -> dict:
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    if point.shape != (space.dim,):
        raise ArgumentError(f"point has {point.size} coordinates, space needs {space.dim}")
    out = {}
    i = 0
    for name, spec in space.params.items():
        if spec.kind == "categorical":
            block = point[i:i + spec.dim]
            out[name] = spec.choices[int(np.argmax(block))]
            i += spec.dim
            continue
        u = min(max(float(point[i]), 0.0), 1.0)
        i += 1
        if spec.kind == "real" and spec.prior == "log-uniform":
            lo, hi = math.log(spec.low), math.log(spec.high)
            v = math.exp(lo + u * (hi - lo))
            out[name] = min(max(v, spec.low), spec.high)
        elif spec.kind == "real":
            out[name] = min(max(spec.low + u * (spec.high - spec.low), spec.low), spec.high)
        else:
            out[name] = int(round(spec.low + u * (spec.high - spec.low)))
    return out


# ---------------------------------------------------------------------------
# surrogate and acquisition


@dataclass
class GaussianProcess:
    """RBF-kernel GP on standardized losses."""

    X: np.ndarray
    y: np.ndarray
    lengthscale: float
    signal_std: float
    noise_std: float
    y_mean: float
    y_scale: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    def kernel(self, A, B) -> np.ndarray:
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        return self.signal_std ** 2 * np.exp(-d2 / (2 * self.lengthscale ** 2))

    def predict(self, Q, standardized: bool = False) -> tuple[np.ndarray, np.ndarray]:
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        Ks = self.kernel(Q, self.X)
        mu = Ks @ self.alpha
        v = np.linalg.solve(self.chol, Ks.T) if len(self.X) else np.zeros((0, len(Q)))
        var = np.maximum(self.signal_std ** 2 - (v * v).sum(axis=0), 0.0)
        sd = np.sqrt(var)
        if standardized:
            return mu, sd
        return self.y_mean + self.y_scale * mu, self.y_scale * sd


def median_pairwise_distance(X) -> float:
    X = np.asarray(X, dtype=np.float64)
    if len(X) < 2:
        return 1.0
    d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    iu = np.triu_indices(len(X), 1)
    med = float(np.median(d[iu]))
    return med if med > 0 else 1.0


def fit_gp(X, y, lengthscale: float | None = None, signal_std: float = 1.0, noise_std: float = 1e-6) -> GaussianProcess:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(X) != len(y):
        raise ArgumentError("X and y lengths differ")
    if len(y) < 2:
        raise ArgumentError("the GP surrogate needs at least two observations")
    ym = float(y.mean())
    ys = float(y.std(ddof=1))
    if not ys > 0:
        ys = 1.0
    z = (y - ym) / ys
    ell = median_pairwise_distance(X) if lengthscale is None else float(lengthscale)
    if not ell > 0:
        raise ArgumentError("lengthscale must be positive")
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    K = signal_std ** 2 * np.exp(-d2 / (2 * ell ** 2))
    base = K + noise_std ** 2 * np.eye(len(y))
    for jitter in _JITTERS:
        try:
            L = np.linalg.cholesky(base + jitter * np.eye(len(y)))
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise DegenerateError("GP kernel matrix is singular even with jitter")
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, z))
    return GaussianProcess(X, z, ell, float(signal_std), float(noise_std), ym, ys, L, alpha, jitter)


def gp_posterior(X, y, Q, lengthscale=None, signal_std=1.0, noise_std=1e-6):
    """Posterior mean and standard deviation (loss units) at query points ``Q``."""
    return fit_gp(X, y, lengthscale, signal_std, noise_std).predict(Q)


def expected_improvement(mu, sigma, best: float) -> np.ndarray:
    """EI for minimization; exactly ``max(best - mu, 0)`` where ``sigma == 0``."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ArgumentError("sigma must be non-negative")
    imp = best - mu
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, imp / np.where(sigma > 0, sigma, 1.0), 0.0)
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    ei = np.where(sigma > 0, imp * ndtr(z) + sigma * pdf, np.maximum(imp, 0.0))
    return np.maximum(ei, 0.0)


# ---------------------------------------------------------------------------
# optimization loops


@dataclass
class Trial:
    index: int
    params: dict
    loss: float | None
    fold_losses: list = field(default_factory=list)
    duration: float = 0.0
    status: str = "ok"
    phase: str = "random"

    def to_json(self) -> dict:
        # duration is left out so history files are reproducible byte for byte
        return {"index": self.index, "phase": self.phase, "status": self.status,
                "params": _jsonable(self.params),
                "loss": None if self.loss is None else float(self.loss),
                "fold_losses": [float(v) for v in self.fold_losses]}

    @classmethod
    def from_json(cls, d: dict) -> "Trial":
        return cls(int(d["index"]), dict(d["params"]), d["loss"], list(d.get("fold_losses", [])),
                   0.0, d.get("status", "ok"), d.get("phase", "random"))


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, np.integer):
            v = int(v)
        elif isinstance(v, np.floating):
            v = float(v)
        out[k] = v
    return out


@dataclass
class SearchResult:
    best: Trial
    history: list
    failures: list

    def running_best(self) -> list[float]:
        out, cur = [], math.inf
        for t in self.history:
            cur = min(cur, t.loss)
            out.append(cur)
        return out


def _evaluate(objective, params, index, phase) -> Trial:
    t0 = time.perf_counter()
    try:
        res = objective(params)
    except (ArithmeticError, DegenerateError):
        res = math.nan
    dt = time.perf_counter() - t0
    loss = getattr(res, "loss", res)
    folds = list(getattr(res, "fold_losses", []))
    if loss is None or not math.isfinite(float(loss)):
        return Trial(index, params, None, folds, dt, "failed", phase)
    return Trial(index, params, float(loss), folds, dt, "ok", phase)


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _finish(trials) -> SearchResult:
    ok = [t for t in trials if t.status == "ok"]
    failed = [t for t in trials if t.status != "ok"]
    if not ok:
        raise DegenerateError("every trial failed")
    best = min(ok, key=lambda t: (t.loss, t.index))
    return SearchResult(best, ok, failed)


def bayes_optimize(objective: Callable[[dict], Any], space: SearchSpace, n_init: int = 5, n_iter: int = 25,
                   seed: int = 0, previous: list | None = None, pool_size: int = POOL_SIZE,
                   on_trial: Callable[[Trial], None] | None = None) -> SearchResult:
    """GP/EI minimization of ``objective``.

    Trial ``i`` draws from ``default_rng([seed, i])``, so the random phase is
    shared with :func:`random_search` and a run resumed from ``previous``
    trials continues exactly where it stopped.
    """
    if n_init < 2:
        raise ArgumentError("n_init must be at least 2")
    if n_iter < 0:
        raise ArgumentError("n_iter must be non-negative")
    trials = sorted(previous or [], key=lambda t: t.index)
    if [t.index for t in trials] != list(range(len(trials))):
        raise ArgumentError("previous trials must be contiguous from index 0")
    for i in range(len(trials), n_init + n_iter):
        rng = _trial_rng(seed, i)
        ok = [t for t in trials if t.status == "ok"]
        if i < n_init or len(ok) < 2:
            params, phase = sample(space, rng), "random"
        else:
            X = np.stack([encode(space, t.params) for t in ok])
            y = np.array([t.loss for t in ok])
            gp = fit_gp(X, y)
            pool = [sample(space, rng) for _ in range(pool_size)]
            P = np.stack([encode(space, p) for p in pool])
            mu, sd = gp.predict(P)
            ei = expected_improvement(mu, sd, float(y.min()))
            params, phase = pool[int(np.argmax(ei))], "bayes"
        trial = _evaluate(objective, params, i, phase)
        trials.append(trial)
        if on_trial is not None:
            on_trial(trial)
    return _finish(trials)


def random_search(objective: Callable[[dict], Any], space: SearchSpace, n_trials: int, seed: int = 0,
                  on_trial: Callable[[Trial], None] | None = None) -> SearchResult:
    if n_trials < 1:
        raise ArgumentError("n_trials must be at least 1")
    trials = []
    for i in range(n_trials):
        trial = _evaluate(objective, sample(space, _trial_rng(seed, i)), i, "random")
        trials.append(trial)
        if on_trial is not None:
            on_trial(trial)
    return _finish(trials)


# ---------------------------------------------------------------------------
# cross-validation objective


@dataclass
class CVResult:
    loss: float
    fold_losses: list
    skipped: list


def kfold_indices(n: int, k: int, seed: int, y=None) -> list[np.ndarray]:
    """Deterministic fold assignment; stratified when binary labels ``y`` are given."""
    if k < 2:
        raise ArgumentError("k_folds must be at least 2")
    if n < k:
        raise ArgumentError(f"{n} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=np.int64)
    if y is None:
        perm = rng.permutation(n)
        fold_of[perm] = np.arange(n) % k
    else:
        y = np.asarray(y)
        offset = 0
        for c in np.unique(y):
            idx = rng.permutation(np.flatnonzero(y == c))
            fold_of[idx] = (np.arange(len(idx)) + offset) % k
            offset += len(idx)
    return [np.flatnonzero(fold_of == f) for f in range(k)]


def cv_objective(kind: str, X, y, params: dict, k_folds: int = 5, seed: int = 0) -> CVResult:
    """Mean held-out loss over ``k_folds``: log loss for classifiers, MSE for regressors.

    Classifier folds whose training part holds a single class are skipped.
    """
    from .metrics import binary_cross_entropy, mean_squared_error
    from .models import get_kind

    spec = get_kind(kind)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    clf = spec.task == "classification"
    folds = kfold_indices(len(y), k_folds, seed, y if clf else None)
    losses, skipped = [], []
    for f, test in enumerate(folds):
        mask = np.ones(len(y), dtype=bool)
        mask[test] = False
        ytr = y[mask]
        if clf and (ytr.min() == ytr.max()):
            skipped.append(f)
            continue
        model = spec.fit(X[mask], ytr, params, seed)
        if clf:
            losses.append(binary_cross_entropy(y[test], model.predict_proba(X[test])))
        else:
            losses.append(mean_squared_error(y[test], model.predict(X[test])))
    if not losses:
        raise DegenerateError("every fold was skipped")
    return CVResult(float(np.mean(losses)), losses, skipped)


def make_cv_objective(kind: str, X, y, k_folds: int = 5, seed: int = 0, fixed: dict | None = None):
    def objective(params):
        return cv_objective(kind, X, y, {**(fixed or {}), **params}, k_folds, seed)

    return objective
