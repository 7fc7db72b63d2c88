"""Wildfire tabular data: schema, CSV ingestion, synthetic generator, splits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ArgumentError, ConfigError, DegenerateError, ParseError, SchemaError, ValidationError

FEATURES = ("wind_speed", "wdir", "smois", "fuels", "ignition")
CATEGORICAL = ("fuels", "ignition")
TARGETS = ("safe_unsafe_fire_behavior", "inside_burned_area", "outside_burned_area")
TARGET_ALIASES = {"safety": TARGETS[0], "inside": TARGETS[1], "outside": TARGETS[2]}


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple = FEATURES
    categorical: tuple = CATEGORICAL

    def __post_init__(self):
        if tuple(self.names) != FEATURES:
            raise SchemaError(f"feature schema is fixed to {FEATURES}")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ArgumentError(f"unknown feature {name!r}; expected one of {self.names}") from None

    def is_categorical(self, name_or_index) -> bool:
        name = self.names[name_or_index] if isinstance(name_or_index, (int, np.integer)) else name_or_index
        return name in self.categorical


SCHEMA = FeatureSchema()


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix over :data:`FEATURES` plus up to three targets.

    Targets absent from a source file are ``None``.
    """

    features: np.ndarray
    safety_label: Optional[np.ndarray] = None
    inside_area: Optional[np.ndarray] = None
    outside_area: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        if X.size == 0:
            X = X.reshape(0, len(FEATURES))
        if X.ndim != 2 or X.shape[1] != len(FEATURES):
            raise ValidationError(f"features must be n x {len(FEATURES)}, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("features contain non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "features", X)
        n = X.shape[0]
        for name in ("safety_label", "inside_area", "outside_area"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.array(v, dtype=np.float64).reshape(-1)
            if v.shape != (n,):
                raise ValidationError(f"{name} has {v.shape[0]} entries, features have {n}")
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"{name} contains non-finite values")
            if name == "safety_label" and not np.all((v == 0) | (v == 1)):
                raise ValidationError("safety_label must be 0 (safe) or 1 (unsafe)")
            if name != "safety_label" and np.any(v < 0):
                raise ValidationError(f"{name} must be non-negative")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def target(self, which: str) -> np.ndarray:
        """Target vector by alias (safety/inside/outside) or column name."""
        col = TARGET_ALIASES.get(which, which)
        attr = {TARGETS[0]: "safety_label", TARGETS[1]: "inside_area", TARGETS[2]: "outside_area"}.get(col)
        if attr is None:
            raise ArgumentError(f"unknown target {which!r}")
        v = getattr(self, attr)
        if v is None:
            raise SchemaError(f"dataset has no {col!r} column", column=col)
        return v

    def columns(self) -> list[tuple[str, np.ndarray]]:
        cols = [(name, self.features[:, j]) for j, name in enumerate(FEATURES)]
        for col, attr in zip(TARGETS, ("safety_label", "inside_area", "outside_area")):
            v = getattr(self, attr)
            if v is not None:
                cols.append((col, v))
        return cols

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)

        def sub(v):
            return None if v is None else v[idx]

        return Dataset(self.features[idx], sub(self.safety_label), sub(self.inside_area), sub(self.outside_area))


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: Dataset
    test: Dataset
    train_index: np.ndarray
    test_index: np.ndarray
    seed: int
    test_fraction: float


# ---------------------------------------------------------------------------
# CSV


def load_csv(path, schema: FeatureSchema = SCHEMA) -> Dataset:
    """Read a comma-separated file with a header row.

    The five feature columns are required, plus at least one target column.
    Data row numbers in errors are 1-based and exclude the header.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        for name in schema.names:
            if name not in header:
                raise SchemaError(f"{path}: missing column {name!r}", column=name)
        targets = [t for t in TARGETS if t in header]
        if not targets:
            raise SchemaError(f"{path}: no target column; need one of {TARGETS}", column=TARGETS[0])
        wanted = list(schema.names) + targets
        pos = [header.index(c) for c in wanted]
        rows = []
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {row_no} has {len(row)} cells, header has {len(header)}",
                                 row=row_no)
            vals = []
            for c, p in zip(wanted, pos):
                cell = row[p].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: row {row_no}, column {c!r} (column {p + 1}): "
                                     f"cannot parse {cell!r} as a number", row=row_no, column=c) from None
                if not math.isfinite(v):
                    raise ValidationError(f"{path}: row {row_no}, column {c!r}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(wanted))
    k = len(schema.names)
    tcols = {t: arr[:, k + i] for i, t in enumerate(targets)}
    return Dataset(arr[:, :k], tcols.get(TARGETS[0]), tcols.get(TARGETS[1]), tcols.get(TARGETS[2]))


def _fmt(v: float, integral: bool) -> str:
    return str(int(v)) if integral else repr(float(v))


def write_csv(d: Dataset, path) -> None:
    path = Path(path)
    cols = d.columns()
    integral = [name in CATEGORICAL or name == TARGETS[0] for name, _ in cols]
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(name for name, _ in cols) + "\n")
        for i in range(d.n):
            fh.write(",".join(_fmt(col[i], it) for (_, col), it in zip(cols, integral)) + "\n")


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass(frozen=True)
class GeneratorSpec:
    """Coefficients of the synthetic ground truth.

    label = 1 iff ``label_wind*z(wind) - label_smois*z(smois) + label_ignition*g(ign) + eps > 0``
    inside = softplus(inside_a0 - inside_smois*smois + inside_ignition*g(ign) + noise)
    outside = softplus(outside_b0 - outside_smois*smois + outside_wind*max(wind - wind_knee, 0) + noise)

    ``z`` standardizes with the population moments of the sampling
    distribution; ``g(ign) = ign - (n_ignition - 1)/2``. wdir and fuels are inert.
    """

    wind_low: float = 0.0
    wind_high: float = 15.0
    smois_low: float = 0.05
    smois_high: float = 0.4
    n_fuels: int = 4
    n_ignition: int = 5
    label_wind: float = 0.9
    label_smois: float = 0.7
    label_ignition: float = 0.2
    label_noise: float = 0.3
    inside_a0: float = 3.0
    inside_smois: float = 10.0
    inside_ignition: float = 0.8
    inside_noise: float = 0.1
    outside_b0: float = 1.0
    outside_smois: float = 8.0
    outside_wind: float = 0.6
    wind_knee: float = 10.0
    outside_noise: float = 0.1

    inert = ("wdir", "fuels")

    def __post_init__(self):
        if not self.wind_high > self.wind_low or not self.smois_high > self.smois_low:
            raise ConfigError("generator ranges must have high > low")
        if self.n_fuels < 1 or self.n_ignition < 1:
            raise ConfigError("category counts must be at least 1")
        for f in ("label_noise", "inside_noise", "outside_noise"):
            if getattr(self, f) < 0:
                raise ConfigError(f"{f} must be non-negative", key=f)

    @classmethod
    def from_json(cls, doc) -> "GeneratorSpec":
        """Build from ``{"coefficients": {...}, "noise": {...}, "categories": {...}}``.

        All sections and keys are optional; unknown keys are rejected.
        """
        if isinstance(doc, (str, Path)):
            with open(doc, encoding="utf-8") as fh:
                doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("generator spec must be a JSON object")
        valid = {f.name for f in fields(cls)}
        noise_keys = {"label": "label_noise", "inside": "inside_noise", "outside": "outside_noise"}
        cat_keys = {"fuels": "n_fuels", "ignition": "n_ignition"}
        kw = {}
        for section, body in doc.items():
            if section not in ("coefficients", "noise", "categories"):
                raise ConfigError(f"unknown generator section {section!r}", key=section)
            if not isinstance(body, dict):
                raise ConfigError(f"section {section!r} must be an object", key=section)
            for k, v in body.items():
                if section == "noise":
                    name = noise_keys.get(k, k)
                elif section == "categories":
                    name = cat_keys.get(k, k)
                else:
                    name = k
                if name not in valid or (section == "coefficients" and name in noise_keys.values()):
                    raise ConfigError(f"unknown key {k!r} in section {section!r}", key=k)
                kw[name] = v
        return cls(**kw)

    def to_json(self) -> dict:
        d = asdict(self)
        noise = {"label": d.pop("label_noise"), "inside": d.pop("inside_noise"),
                 "outside": d.pop("outside_noise")}
        cats = {"fuels": d.pop("n_fuels"), "ignition": d.pop("n_ignition")}
        return {"coefficients": d, "noise": noise, "categories": cats}


def _softplus(t):
    return np.logaddexp(0.0, t)


def synthesize(n: int, seed: int, spec: GeneratorSpec | None = None) -> Dataset:
    """Draw ``n`` rows from the synthetic ground truth; pure in ``(n, seed, spec)``."""
    if n < 0:
        raise ArgumentError("n must be non-negative")
    spec = spec or GeneratorSpec()
    rng = np.random.default_rng(seed)
    wind = rng.uniform(spec.wind_low, spec.wind_high, n)
    wdir = rng.uniform(0.0, 360.0, n)
    smois = rng.uniform(spec.smois_low, spec.smois_high, n)
    fuels = rng.integers(0, spec.n_fuels, n).astype(np.float64)
    ign = rng.integers(0, spec.n_ignition, n).astype(np.float64)
    eps = rng.normal(0.0, 1.0, (3, n))

    def z_uniform(v, lo, hi):
        return (v - (lo + hi) / 2) / ((hi - lo) / math.sqrt(12.0))

    g_ign = ign - (spec.n_ignition - 1) / 2.0
    score = (spec.label_wind * z_uniform(wind, spec.wind_low, spec.wind_high)
             - spec.label_smois * z_uniform(smois, spec.smois_low, spec.smois_high)
             + spec.label_ignition * g_ign
             + spec.label_noise * eps[0])
    label = (score > 0).astype(np.float64)
    inside = _softplus(spec.inside_a0 - spec.inside_smois * smois + spec.inside_ignition * g_ign
                       + spec.inside_noise * eps[1])
    outside = _softplus(spec.outside_b0 - spec.outside_smois * smois
                        + spec.outside_wind * np.maximum(wind - spec.wind_knee, 0.0)
                        + spec.outside_noise * eps[2])
    X = np.column_stack([wind, wdir, smois, fuels, ign]).reshape(n, len(FEATURES))
    return Dataset(X, label, inside, outside)


# ---------------------------------------------------------------------------
# statistics and splitting


def pearson_correlation(d: Dataset) -> tuple[list[str], np.ndarray]:
    """Pearson matrix over features then present targets; rows/cols named by the list."""
    cols = d.columns()
    if d.n < 2:
        raise ArgumentError("correlation needs at least two rows")
    names = [c for c, _ in cols]
    M = np.column_stack([v for _, v in cols])
    C = M - M.mean(axis=0)
    ss = np.sqrt((C * C).sum(axis=0))
    for name, s, col in zip(names, ss, M.T):
        if s == 0 or np.all(col == col[0]):
            raise DegenerateError(f"column {name!r} is constant; correlation undefined", column=name)
    R = (C.T @ C) / np.outer(ss, ss)
    R = (R + R.T) / 2
    np.clip(R, -1.0, 1.0, out=R)
    np.fill_diagonal(R, 1.0)
    return names, R


def train_test_split(d: Dataset, test_fraction: float = 0.2, seed: int = 0, stratify: bool = False) -> SplitPair:
    if not 0 < test_fraction < 1:
        raise ArgumentError("test_fraction must lie strictly between 0 and 1")
    if d.n < 2:
        raise ArgumentError("need at least two rows to split")
    rng = np.random.default_rng(seed)
    if stratify:
        y = d.target("safety")
        groups = [np.flatnonzero(y == c) for c in (0, 1)]
        if any(len(g) == 0 for g in groups):
            raise DegenerateError("stratified split needs both classes present")
        test = []
        for g in groups:
            perm = rng.permutation(g)
            k = int(round(test_fraction * len(g)))
            test.append(perm[:k])
        test_idx = np.sort(np.concatenate(test))
    else:
        perm = rng.permutation(d.n)
        k = min(max(int(round(test_fraction * d.n)), 1), d.n - 1)
        test_idx = np.sort(perm[:k])
    mask = np.zeros(d.n, dtype=bool)
    mask[test_idx] = True
    train_idx = np.flatnonzero(~mask)
    return SplitPair(d.take(train_idx), d.take(test_idx), train_idx, test_idx, seed, test_fraction)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scale = np.where(self.degenerate, 1.0, self.std)
        Z = (X - self.mean) / scale
        return np.where(self.degenerate, 0.0, Z)

    def inverse(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.float64)
        return np.where(self.degenerate, self.mean, Z * self.std + self.mean)


def fit_standardizer(X) -> Standardizer:
    """Column means and sample (n-1) standard deviations; zero-std columns are flagged."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ArgumentError("standardize needs a matrix with at least two rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    degenerate = (std == 0) | np.all(X == X[0], axis=0)
    return Standardizer(mean, std, degenerate)


def standardize(d) -> tuple[np.ndarray, Standardizer]:
    """Standardize the feature matrix of ``d`` (a Dataset or plain matrix)."""
    X = d.features if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
    st = fit_standardizer(X)
    return st.transform(X), st


def unstandardize(Z, st: Standardizer) -> np.ndarray:
    return st.inverse(Z)
