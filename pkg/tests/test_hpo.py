import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from pyrolens.errors import ArgumentError, ConfigError, DegenerateError
from pyrolens.hpo import (PRESET_TABLES, SearchSpace, Trial, bayes_optimize, cv_objective, decode, encode,
                          expected_improvement, fit_gp, gp_posterior, kfold_indices, load_preset,
                          median_pairwise_distance, parse_space, random_search, resolve_space, sample,
                          validate_params)

MIXED = {"lr": {"kind": "real", "low": 0.001, "high": 1.0, "prior": "log-uniform"},
         "depth": {"kind": "integer", "low": 2, "high": 9},
         "frac": {"kind": "real", "low": 0.0, "high": 1.0},
         "mode": {"kind": "categorical", "choices": ["a", "b", 3]}}


def test_parse_and_round_trip():
    sp = parse_space(MIXED)
    assert sp.names == ["lr", "depth", "frac", "mode"]
    assert sp.dim == 6
    assert parse_space(sp.to_json()).to_json() == sp.to_json()


@pytest.mark.parametrize("doc,key", [
    ({"x": {"kind": "real", "low": 1, "high": 0}}, "x.low"),
    ({"x": {"kind": "real", "low": 0, "high": 1, "prior": "log-uniform"}}, "x.low"),
    ({"x": {"kind": "integer", "low": 0.5, "high": 3}}, "x.low"),
    ({"x": {"kind": "categorical", "choices": []}}, "x.choices"),
    ({"x": {"kind": "categorical", "choices": [1, 1]}}, "x.choices"),
    ({"x": {"kind": "ordinal", "low": 0, "high": 1}}, "x.kind"),
    ({"x": {"kind": "integer", "low": 0, "high": 3, "step": 1}}, "x.step"),
    ({"x": {"kind": "real", "low": "0", "high": 1}}, "x.low"),
])
def test_parse_errors_name_the_key(doc, key):
    with pytest.raises(ConfigError) as e:
        parse_space(doc)
    assert e.value.key == key


def test_presets_load():
    for head, name in PRESET_TABLES.items():
        for model in load_preset(name):
            sp = resolve_space(f"{head}:{model}")
            assert isinstance(sp, SearchSpace)
    with pytest.raises(ConfigError):
        resolve_space("table1:NoSuchModel")


def test_resolve_from_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"a": {"kind": "integer", "low": 1, "high": 4}}')
    assert resolve_space(str(p)).names == ["a"]
    p.write_text("{broken")
    with pytest.raises(ConfigError):
        resolve_space(str(p))


@given(st.integers(0, 2**31))
def test_sample_encode_decode(seed):
    sp = parse_space(MIXED)
    p = sample(sp, np.random.default_rng(seed))
    validate_params(sp, p)
    u = encode(sp, p)
    assert u.shape == (6,) and np.all((u >= 0) & (u <= 1))
    back = decode(sp, u)
    assert back["depth"] == p["depth"] and back["mode"] == p["mode"]
    assert back["lr"] == pytest.approx(p["lr"], rel=1e-12)
    assert back["frac"] == pytest.approx(p["frac"], abs=1e-15)


def test_validate_params_errors():
    sp = parse_space(MIXED)
    good = {"lr": 0.1, "depth": 3, "frac": 0.5, "mode": 3}
    validate_params(sp, good)
    for bad, key in [({**good, "depth": 10}, "depth"), ({**good, "depth": 2.5}, "depth"),
                     ({**good, "mode": "c"}, "mode"), ({**good, "extra": 1}, "extra"),
                     ({k: v for k, v in good.items() if k != "lr"}, "lr"), ({**good, "frac": True}, "frac")]:
        with pytest.raises(ConfigError) as e:
            validate_params(sp, bad)
        assert e.value.key == key


def test_decode_clips_and_checks_shape():
    sp = parse_space(MIXED)
    out = decode(sp, [2.0, -1.0, 0.5, 0, 0, 1])
    assert out["lr"] == 1.0 and out["depth"] == 2 and out["mode"] == 3
    with pytest.raises(ArgumentError):
        decode(sp, [0.5])


def _posterior_oracle(X, y, Q, ell, sn=1e-6):
    ym, ys = y.mean(), y.std(ddof=1)
    z = (y - ym) / ys

    def k(A, B):
        return np.exp(-np.sum((A[:, None] - B[None]) ** 2, axis=2) / (2 * ell * ell))

    Kinv = np.linalg.inv(k(X, X) + sn * sn * np.eye(len(X)))
    mu = k(Q, X) @ Kinv @ z
    var = 1.0 - np.einsum("ij,jk,ik->i", k(Q, X), Kinv, k(Q, X))
    return ym + ys * mu, ys * np.sqrt(np.maximum(var, 0))


def test_gp_matches_direct_formula():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(8, 2))
    y = np.sin(4 * X[:, 0]) + X[:, 1]
    Q = rng.uniform(size=(20, 2))
    mu, sd = gp_posterior(X, y, Q, noise_std=1e-3)
    ell = median_pairwise_distance(X)
    rmu, rsd = _posterior_oracle(X, y, Q, ell, 1e-3)
    np.testing.assert_allclose(mu, rmu, atol=1e-8)
    np.testing.assert_allclose(sd, rsd, atol=1e-8)


def test_gp_interpolates_and_lengthscale_rule():
    X = np.array([[0.0], [0.5], [1.0]])
    y = np.array([1.0, 0.0, 2.0])
    mu, sd = gp_posterior(X, y, X)
    np.testing.assert_allclose(mu, y, atol=1e-6)
    assert np.all(sd < 1e-3)
    assert median_pairwise_distance(X) == 0.5
    assert median_pairwise_distance(X[:1]) == 1.0
    assert median_pairwise_distance(np.zeros((3, 1))) == 1.0


def test_gp_duplicate_points_use_jitter():
    X = np.zeros((4, 1))
    gp = fit_gp(X, np.array([1.0, 2.0, 3.0, 4.0]), noise_std=0.0)
    assert gp.jitter > 0
    with pytest.raises(ArgumentError):
        fit_gp(X[:1], np.array([1.0]))


@given(st.floats(-3, 3), st.floats(0.01, 3), st.floats(-3, 3))
def test_ei_closed_form(mu, sigma, best):
    z = (best - mu) / sigma
    ref = (best - mu) * norm.cdf(z) + sigma * norm.pdf(z)
    got = float(expected_improvement(np.array([mu]), np.array([sigma]), best)[0])
    assert got == pytest.approx(max(ref, 0.0), abs=1e-12)
    assert got >= 0


def test_ei_zero_sigma():
    ei = expected_improvement(np.array([1.0, 3.0]), np.zeros(2), 2.0)
    assert ei.tolist() == [1.0, 0.0]
    with pytest.raises(ArgumentError):
        expected_improvement(np.array([0.0]), np.array([-1.0]), 0.0)


THETA = parse_space({"theta": {"kind": "real", "low": 0.0, "high": 1.0}})


def test_bo_finds_quadratic_minimum():
    res = bayes_optimize(lambda p: (p["theta"] - 0.3) ** 2, THETA, 5, 20, seed=0)
    assert abs(res.best.params["theta"] - 0.3) <= 0.05
    assert [t.phase for t in res.history[:5]] == ["random"] * 5
    assert res.history[5].phase == "bayes"
    rb = res.running_best()
    assert all(a >= b for a, b in zip(rb, rb[1:]))


def test_bo_random_phase_equals_random_search():
    f = lambda p: abs(p["theta"] - 0.7)  # noqa: E731
    bo = bayes_optimize(f, THETA, 4, 2, seed=7)
    rs = random_search(f, THETA, 4, seed=7)
    assert [t.params for t in bo.history[:4]] == [t.params for t in rs.history]


def test_bo_resume_is_identical():
    f = lambda p: (p["theta"] - 0.6) ** 2  # noqa: E731
    full = bayes_optimize(f, THETA, 3, 6, seed=2)
    part = bayes_optimize(f, THETA, 3, 2, seed=2)
    resumed = bayes_optimize(f, THETA, 3, 6, seed=2, previous=part.history)
    assert [t.to_json() for t in resumed.history] == [t.to_json() for t in full.history]
    with pytest.raises(ArgumentError):
        bayes_optimize(f, THETA, 3, 6, seed=2, previous=part.history[1:])


def test_failed_trials_are_recorded():
    def f(p):
        return math.nan if p["theta"] < 0.5 else p["theta"]

    seen = []
    res = bayes_optimize(f, THETA, 4, 6, seed=1, on_trial=seen.append)
    assert len(seen) == 10
    assert all(t.status == "failed" and t.loss is None for t in res.failures)
    assert all(t.status == "ok" for t in res.history)
    assert len(res.failures) + len(res.history) == 10
    with pytest.raises(DegenerateError):
        random_search(lambda p: math.inf, THETA, 3)


def test_trial_json_round_trip():
    t = Trial(3, {"a": np.int64(2), "b": np.float64(0.5)}, 1.25, [1.0, 1.5], 9.9, "ok", "bayes")
    d = t.to_json()
    assert "duration" not in d and type(d["params"]["a"]) is int
    assert Trial.from_json(d).to_json() == d


def test_kfold_partition_and_stratification():
    y = np.r_[np.zeros(30), np.ones(12)]
    folds = kfold_indices(42, 5, 0, y)
    assert sorted(np.concatenate(folds).tolist()) == list(range(42))
    for f in folds:
        assert 2 <= y[f].sum() <= 3
    assert [f.tolist() for f in kfold_indices(42, 5, 0, y)] == [f.tolist() for f in folds]
    with pytest.raises(ArgumentError):
        kfold_indices(3, 5, 0)


def test_cv_objective_matches_manual_folds():
    from pyrolens.data import synthesize
    from pyrolens.metrics import mean_squared_error
    from pyrolens.models import fit_model

    d = synthesize(120, 0)
    X, y = d.features, d.inside_area
    res = cv_objective("ridge", X, y, {"alpha": 0.5}, 4, 3)
    manual = []
    for test in kfold_indices(120, 4, 3):
        mask = np.ones(120, bool)
        mask[test] = False
        m = fit_model("ridge", X[mask], y[mask], {"alpha": 0.5})
        manual.append(mean_squared_error(y[test], m.predict(X[test])))
    np.testing.assert_allclose(res.fold_losses, manual, rtol=1e-12)
    assert res.loss == pytest.approx(np.mean(manual))
    clf = cv_objective("gbdt", X, d.safety_label, {"n_estimators": 5}, 3, 0)
    assert len(clf.fold_losses) == 3 and clf.skipped == []
    with pytest.raises(ConfigError):
        cv_objective("gbdt", X, d.safety_label, {"bogus": 1}, 3, 0)
