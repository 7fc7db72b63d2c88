"""``pyrolens`` command line: synth, train, compare, tune, explain, corr.

Every command writes fixed-name artifacts under ``--out``. JSON goes through
one canonical dumper and SVGs are rendered without timestamps, so a re-run
with the same seed reproduces every file byte for byte.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import hpo, plotting
from .data import CATEGORICAL, FEATURES, TARGET_ALIASES, GeneratorSpec, load_csv, pearson_correlation, \
    synthesize, train_test_split, write_csv
from .errors import ArgumentError, ConfigError, PyrolensError, VersionError
from .metrics import binary_cross_entropy, classification_metrics, confusion, mean_squared_error, \
    regression_metrics
from .models import dumps_json, get_kind, load_bundle, to_bundle
from .schemas import validate
from .tree import feature_importance
from .xai import LOCAL_ACCURACY_TOL, level_grid, lime_explain, pdp, shap_summary, tree_shap_values

SEED_ENV = "PYROLENS_SEED"
DEFAULT_BUDGET = "5+25"
SHAP_ROWS = 200
USAGE_EXIT = 1
FAILURE_EXIT = 2

# configuration-type errors exit 1; data content and numeric failures exit 2
_USAGE_ERRORS = (ConfigError, ArgumentError, VersionError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _write_json(path: Path, doc, schema: str | None = None) -> Path:
    if schema is not None:
        validate(doc, schema)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(doc), encoding="utf-8")
    return path


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def _report(out: Path, command: str, config: dict, charts: list, **payload) -> None:
    # chart paths are relative to --out so reports from different directories compare equal
    rel = [c.relative_to(out).as_posix() for c in charts]
    for c in charts:
        if not c.exists():
            raise OSError(f"chart {c} was not written")
    doc = {"command": command, "config": config, "charts": rel, **payload}
    _write_json(out / "report.json", doc, "report")


def _target_for(task: str, target: str | None) -> str:
    if target is None:
        return "safety" if task == "classification" else "inside"
    if (target == "safety") != (task == "classification"):
        raise UsageError(f"target {target!r} does not fit a {task} model")
    return target


def _params_from(path: str | None, kind: str) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validate(doc, "best_params")
    if doc.get("kind") not in (None, kind):
        raise ConfigError(f"{path} holds params for {doc['kind']!r}, not {kind!r}", key="kind")
    return dict(doc["params"])


def _evaluate(model, task: str, X, y):
    if task == "classification":
        p = model.predict_proba(X)
        rep = classification_metrics(confusion(y, model.predict(X)))
        rep.values["l_cls"] = binary_cross_entropy(y, p)
        return rep
    y_hat = model.predict(X)
    rep = regression_metrics(y, y_hat)
    rep.values["l_reg"] = mean_squared_error(y, y_hat)
    return rep


def _output_fn(model, task: str):
    return model.predict_proba if task == "classification" else model.predict


def _feature_list(spec: str | None) -> list[int]:
    if spec is None:
        return list(range(len(FEATURES)))
    out = []
    for name in spec.split(","):
        name = name.strip()
        if name not in FEATURES:
            raise UsageError(f"unknown feature {name!r}; choose from {', '.join(FEATURES)}")
        out.append(FEATURES.index(name))
    return out


def _rows(spec: str | None, n: int, default: int) -> list[int]:
    """0-based row indices from a 1-based ``--sample`` list like ``3`` or ``1,5,9``."""
    if spec is None:
        return list(range(min(n, default)))
    out = []
    for tok in spec.split(","):
        try:
            r = int(tok)
        except ValueError:
            raise UsageError(f"--sample expects 1-based row numbers, got {tok!r}") from None
        if not 1 <= r <= n:
            raise UsageError(f"row {r} outside 1..{n}")
        out.append(r - 1)
    return out


def _parse_budget(text: str) -> tuple[int, int]:
    head, sep, tail = text.partition("+")
    try:
        n_init, n_iter = int(head), int(tail) if sep else 0
    except ValueError:
        raise UsageError(f"--budget expects N+M, got {text!r}") from None
    if n_init < 2 or n_iter < 0:
        raise UsageError("--budget needs N >= 2 random trials and M >= 0 guided ones")
    return n_init, n_iter


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    spec = GeneratorSpec.from_json(json.loads(Path(args.spec).read_text(encoding="utf-8"))) if args.spec \
        else GeneratorSpec()
    if args.n < 0:
        raise UsageError("--n must be non-negative")
    d = synthesize(args.n, args.seed, spec)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, path)
    print(f"wrote {d.n} rows to {path}")
    return 0


def cmd_train(args) -> int:
    ks = get_kind(args.kind)
    target = _target_for(ks.task, args.target)
    params = _params_from(args.params, ks.name)
    ks.resolve(params)
    d = load_csv(args.data)
    split = train_test_split(d, args.test_fraction, args.seed, stratify=ks.task == "classification")
    ytr, yte = split.train.target(target), split.test.target(target)
    model = ks.fit(split.train.features, ytr, params, args.seed)
    rep = _evaluate(model, ks.task, split.test.features, yte)
    out = _out(args)
    bundle = to_bundle(model, ks.resolve(params), target=TARGET_ALIASES[target], seed=args.seed)
    _write_json(out / "model.json", bundle, "model")
    metrics = {"kind": ks.name, "target": TARGET_ALIASES[target], "n_train": split.train.n,
               "n_test": split.test.n, "metrics": rep.to_json()}
    _write_json(out / "metrics.json", metrics, "metrics")
    _write_csv(out / "metrics.csv", ["metric", "value"],
               [(k, v) for k, v in rep.to_json().items() if k != "degenerate"])
    if ks.task == "classification":
        names = ["accuracy", "precision", "recall", "f1"]
        chart = plotting.grouped_bars([ks.name], {n: [rep[n]] for n in names}, out / "charts" / "metrics.svg",
                                      title=f"{ks.name} held-out scores")
    else:
        chart = plotting.fit_scatter(yte, model.predict(split.test.features), out / "charts" / "fit.svg",
                                     title=f"{ks.name} on {TARGET_ALIASES[target]}")
    _report(out, "train", _config(args), [chart], metrics=metrics["metrics"])
    print(" ".join(f"{k}={v:.4f}" for k, v in rep.to_json().items() if k != "degenerate"))
    return 0


def cmd_compare(args) -> int:
    kinds = [k.strip() for k in args.kind.split(",") if k.strip()]
    if len(kinds) < 2:
        raise UsageError("compare needs at least two model kinds")
    if len(set(kinds)) != len(kinds):
        raise UsageError("compare lists a model kind twice")
    specs = [get_kind(k) for k in kinds]
    tasks = {s.task for s in specs}
    if len(tasks) != 1:
        raise UsageError("compare cannot mix classification and regression kinds")
    task = tasks.pop()
    target = _target_for(task, args.target)
    d = load_csv(args.data)
    split = train_test_split(d, args.test_fraction, args.seed, stratify=task == "classification")
    ytr, yte = split.train.target(target), split.test.target(target)
    rows = []
    for s in specs:
        model = s.fit(split.train.features, ytr, None, args.seed)
        rep = _evaluate(model, task, split.test.features, yte)
        rows.append({"kind": s.name, "params": s.resolve(None), "metrics": rep.to_json()})
    names = ["accuracy", "precision", "recall", "f1"] if task == "classification" else ["r2"]
    key = names[0]
    ranking = [r["kind"] for r in sorted(rows, key=lambda r: (-r["metrics"][key], r["kind"]))]
    out = _out(args)
    doc = {"task": task, "target": TARGET_ALIASES[target], "rank_metric": key, "ranking": ranking, "rows": rows}
    _write_json(out / "comparison.json", doc, "comparison")
    _write_csv(out / "comparison.csv", ["kind", *names], [(r["kind"], *[r["metrics"][n] for n in names])
                                                          for r in rows])
    chart = plotting.grouped_bars(kinds, {n: [r["metrics"][n] for r in rows] for n in names},
                                  out / "charts" / "comparison.svg",
                                  title=f"Held-out {'scores' if task == 'classification' else 'R2'}",
                                  ylabel="score" if task == "classification" else "R2")
    _report(out, "compare", _config(args), [chart], ranking=ranking)
    for i, r in enumerate(ranking, 1):
        m = next(row for row in rows if row["kind"] == r)["metrics"]
        print(f"{i}. {r} {key}={m[key]:.4f}")
    return 0


def _read_history(path: Path, space: hpo.SearchSpace) -> list:
    trials = []
    if not path.exists():
        return trials
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} line {lineno}: invalid JSON ({exc})") from None
        validate(doc, "trial")
        hpo.validate_params(space, doc["params"])
        trials.append(hpo.Trial.from_json(doc))
    return trials


def cmd_tune(args) -> int:
    ks = get_kind(args.kind)
    target = _target_for(ks.task, args.target)
    ref = args.space or ks.space
    space = hpo.resolve_space(ref)
    probe = hpo.sample(space, np.random.default_rng(0))
    ks.resolve(probe)
    n_init, n_iter = _parse_budget(args.budget)
    d = load_csv(args.data)
    split = train_test_split(d, args.test_fraction, args.seed, stratify=ks.task == "classification")
    X, y = split.train.features, split.train.target(target)
    out = _out(args)
    hist_path = out / "history.jsonl"
    previous = _read_history(hist_path, space)
    previous = previous[: n_init + n_iter]
    with hist_path.open("a", encoding="utf-8") as fh:
        def record(trial):
            doc = trial.to_json()
            validate(doc, "trial")
            fh.write(json.dumps(doc, allow_nan=False) + "\n")
            fh.flush()
            status = f"{trial.loss:.6f}" if trial.loss is not None else "failed"
            print(f"trial {trial.index} [{trial.phase}] loss={status}")

        objective = hpo.make_cv_objective(ks.name, X, y, args.folds, args.seed)
        result = hpo.bayes_optimize(objective, space, n_init, n_iter, args.seed, previous, on_trial=record)
    best = {"kind": ks.name, "space": ref, "params": result.best.to_json()["params"],
            "cv_loss": result.best.loss}
    _write_json(out / "best_params.json", best, "best_params")
    curve = result.running_best()
    _write_csv(out / "convergence.csv", ["trial", "loss", "best_loss"],
               [(t.index, t.loss, b) for t, b in zip(result.history, curve)])
    chart = plotting.line_curve([t.index for t in result.history], curve, out / "charts" / "convergence.svg",
                                xlabel="trial", ylabel="best CV loss", title=f"Tuning {ks.name}")
    _report(out, "tune", _config(args), [chart], best=best, n_failed=len(result.failures))
    print(f"best cv_loss={result.best.loss:.6f} params={json.dumps(best['params'])}")
    return 0


def cmd_explain(args) -> int:
    model, bundle = load_bundle(args.model)
    ks = get_kind(bundle["kind"])
    d = load_csv(args.data)
    X = d.features
    out = _out(args)
    charts = []
    method = args.method
    if method == "shap":
        if not hasattr(model, "trees"):
            raise UsageError(f"shap needs a tree model, {ks.name!r} is not one")
        rows = _rows(args.sample, d.n, SHAP_ROWS)
        Xs = X[rows]
        base, phi, pred = tree_shap_values(model, Xs)
        gaps = np.abs(base + phi.sum(axis=1) - pred)
        if gaps.size and gaps.max() > LOCAL_ACCURACY_TOL:
            raise PyrolensError(f"local accuracy violated by {gaps.max():.3e}")
        ranking = shap_summary(phi, FEATURES)
        doc = {"model_kind": ks.name, "output": "margin" if ks.name == "gbdt" else "raw",
               "base_value": base, "features": list(FEATURES),
               "mean_abs": {n: v for n, v in ranking},
               "rows": [{"row": r + 1, "prediction": float(p), "phi": [float(v) for v in ph]}
                        for r, p, ph in zip(rows, pred, phi)]}
        _write_json(out / "shap.json", doc, "shap")
        _write_csv(out / "shap.csv", ["row", "prediction", *FEATURES],
                   [(r + 1, float(p), *[float(v) for v in ph]) for r, p, ph in zip(rows, pred, phi)])
        charts.append(plotting.shap_beeswarm(phi, Xs, FEATURES, out / "charts" / "shap_summary.svg", args.seed))
        charts.append(plotting.horizontal_bars([n for n, _ in ranking], [v for _, v in ranking],
                                               out / "charts" / "shap_mean_abs.svg",
                                               title="mean(|SHAP value|)", xlabel="mean |phi|"))
        print("ranking: " + ", ".join(f"{n}={v:.4f}" for n, v in ranking))
    elif method == "lime":
        row = _rows(args.sample or "1", d.n, 1)
        if len(row) != 1:
            raise UsageError("lime explains a single --sample row")
        exp = lime_explain(_output_fn(model, ks.task), X[row[0]], X, n_samples=args.lime_samples, seed=args.seed)
        doc = {"model_kind": ks.name, "row": row[0] + 1, **exp.to_json()}
        _write_json(out / "lime.json", doc, "lime")
        _write_csv(out / "lime.csv", ["feature", "weight"], zip(FEATURES, [float(c) for c in exp.coefficients]))
        charts.append(plotting.horizontal_bars(list(FEATURES), exp.coefficients, out / "charts" / "lime.svg",
                                               title=f"LIME weights, row {row[0] + 1}", xlabel="weight"))
        print(" ".join(f"{n}={c:.4g}" for n, c in zip(FEATURES, exp.coefficients)))
    elif method == "pdp":
        curves = []
        fn = _output_fn(model, ks.task)
        for j in _feature_list(args.feature):
            grid = level_grid(X, j) if FEATURES[j] in CATEGORICAL else args.grid
            c = pdp(fn, X, j, grid)
            curves.append(c.to_json())
            charts.append(plotting.line_curve(c.grid, c.values, out / "charts" / f"pdp_{FEATURES[j]}.svg",
                                              xlabel=FEATURES[j], ylabel="mean prediction",
                                              title=f"Partial dependence on {FEATURES[j]}"))
        _write_json(out / "pdp.json", {"model_kind": ks.name, "curves": curves}, "pdp")
        _write_csv(out / "pdp.csv", ["feature", "grid", "value"],
                   [(c["feature"], g, v) for c in curves for g, v in zip(c["grid"], c["values"])])
        for c in curves:
            print(f"{c['feature']}: {c['values'][0]:.4g} .. {c['values'][-1]:.4g}")
    else:
        if not hasattr(model, "trees"):
            raise UsageError(f"importance needs a tree model, {ks.name!r} is not one")
        imp = {kind: feature_importance(model.trees, len(FEATURES), kind) for kind in ("gain", "cover", "frequency")}
        doc = {"model_kind": ks.name, "features": list(FEATURES),
               "importance": {k: [float(v) for v in a] for k, a in imp.items()}}
        _write_json(out / "importance.json", doc, "importance")
        _write_csv(out / "importance.csv", ["feature", "gain", "cover", "frequency"],
                   [(n, float(imp["gain"][j]), float(imp["cover"][j]), float(imp["frequency"][j]))
                    for j, n in enumerate(FEATURES)])
        charts.append(plotting.horizontal_bars(list(FEATURES), imp["gain"], out / "charts" / "importance.svg",
                                               title="Gain importance", xlabel="share of total gain"))
        print(" ".join(f"{n}={v:.4f}" for n, v in zip(FEATURES, imp["gain"])))
    _report(out, "explain", _config(args), charts)
    return 0


def cmd_corr(args) -> int:
    d = load_csv(args.data)
    names, R = pearson_correlation(d)
    out = _out(args)
    doc = {"features": names, "matrix": [[float(v) for v in row] for row in R]}
    _write_json(out / "correlation.json", doc, "correlation")
    _write_csv(out / "correlation.csv", ["feature", *names], [(n, *row) for n, row in zip(names, R.tolist())])
    chart = plotting.correlation_heatmap(names, R, out / "charts" / "correlation.svg")
    _report(out, "corr", _config(args), [chart])
    print(f"{len(names)}x{len(names)} correlation matrix")
    return 0


# ---------------------------------------------------------------------------
# parser


def _config(args) -> dict:
    skip = {"out", "func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pyrolens", description="Fire-behavior models, tuning and explanations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        if data:
            sp.add_argument("--data", required=True, help="dataset CSV")
        sp.add_argument("--seed", type=int, default=None, help=f"random seed (default ${SEED_ENV} or 0)")
        sp.add_argument("--out", required=True, help="output directory")

    def split_opts(sp):
        sp.add_argument("--target", choices=sorted(TARGET_ALIASES), default=None)
        sp.add_argument("--test-fraction", type=float, default=0.2)

    s = sub.add_parser("synth", help="write a synthetic dataset CSV")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--spec", help="generator spec JSON")
    common(s, data=False)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="fit one model and score the held-out split")
    common(s)
    s.add_argument("--kind", required=True)
    s.add_argument("--params", help="best-params JSON to train with")
    split_opts(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("compare", help="score several model kinds on one split")
    common(s)
    s.add_argument("--kind", required=True, help="comma-separated model kinds")
    split_opts(s)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("tune", help="Bayesian hyperparameter search with k-fold CV")
    common(s)
    s.add_argument("--kind", required=True)
    s.add_argument("--space", help="search-space JSON or preset like table1:Xgboost")
    s.add_argument("--budget", default=DEFAULT_BUDGET, help="random+guided trials, e.g. 5+25")
    s.add_argument("--folds", type=int, default=5)
    split_opts(s)
    s.set_defaults(func=cmd_tune)

    s = sub.add_parser("explain", help="SHAP, LIME, PDP or importance report for a saved model")
    common(s)
    s.add_argument("--model", required=True, help="model.json from train")
    s.add_argument("--method", required=True, choices=["shap", "lime", "pdp", "importance"])
    s.add_argument("--sample", help="1-based data row(s), comma-separated")
    s.add_argument("--feature", help="feature name(s) for pdp, comma-separated")
    s.add_argument("--grid", type=int, default=20, help="pdp grid points for continuous features")
    s.add_argument("--lime-samples", type=int, default=2000)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("corr", help="feature/target correlation matrix and heatmap")
    common(s)
    s.set_defaults(func=cmd_corr)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed = resolve_seed(args.seed)
        print(f"seed: {args.seed}")
        return args.func(args)
    except UsageError as exc:
        print(f"pyrolens: error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except _USAGE_ERRORS as exc:
        key = getattr(exc, "key", None)
        print(f"pyrolens: error: {exc}" + (f" (key: {key})" if key else ""), file=sys.stderr)
        return USAGE_EXIT
    except (OSError, PyrolensError) as exc:
        print(f"pyrolens: error: {exc}", file=sys.stderr)
        return FAILURE_EXIT
