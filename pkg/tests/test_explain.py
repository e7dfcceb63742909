from math import comb

import numpy as np
import pytest

import oracles
from footfall import explain as E
from footfall.classify import Dataset, KernelSpec, standardize, train_svm
from footfall.features import FEATURE_NAMES


def _mlp(seed, d=9):
    rng = np.random.default_rng(seed)
    W1 = rng.normal(size=(d, 6))
    w2 = rng.normal(size=6)

    def f(X):
        return np.tanh(np.atleast_2d(X) @ W1) @ w2

    return f


def test_efficiency_and_permutation_oracle():
    d = 5
    f = _mlp(0, d)
    rng = np.random.default_rng(1)
    bg, x = rng.normal(size=(2, d))
    exp = E.exact_shapley(f, bg, x)
    assert exp.phi.sum() + exp.base_value == pytest.approx(exp.model_output, abs=1e-9)

    def v(S):
        z = bg.copy()
        for i in S:
            z[i] = x[i]
        return float(f(z)[0])

    np.testing.assert_allclose(exp.phi, oracles.shapley_permutations(v, d), atol=1e-12)


def test_dummy_feature():
    rng = np.random.default_rng(2)
    w = rng.normal(size=9)
    w[4] = 0.0
    f = lambda X: np.sin(np.atleast_2d(X) @ w)
    exp = E.exact_shapley(f, rng.normal(size=9), rng.normal(size=9))
    assert abs(exp.phi[4]) <= 1e-9


def test_linear_closed_form():
    rng = np.random.default_rng(3)
    w = rng.normal(size=9)
    bg, x = rng.normal(size=(2, 9))
    exp = E.exact_shapley(lambda X: np.atleast_2d(X) @ w + 0.7, bg, x)
    np.testing.assert_allclose(exp.phi, w * (x - bg), atol=1e-12)


def test_symmetry():
    # features 0 and 1 enter symmetrically and have identical values
    f = lambda X: np.atleast_2d(X)[:, 0] * np.atleast_2d(X)[:, 1] + np.atleast_2d(X)[:, 2]
    exp = E.exact_shapley(f, np.zeros(3), np.array([2.0, 2.0, 1.0]))
    assert exp.phi[0] == pytest.approx(exp.phi[1], abs=1e-12)


def test_linearity():
    f, g = _mlp(4), _mlp(5)
    rng = np.random.default_rng(6)
    bg, x = rng.normal(size=(2, 9))
    a = E.exact_shapley(f, bg, x).phi
    b = E.exact_shapley(g, bg, x).phi
    c = E.exact_shapley(lambda X: f(X) + g(X), bg, x).phi
    np.testing.assert_allclose(c, a + b, atol=1e-9)


def test_exact_results_repeat():
    f = _mlp(7)
    rng = np.random.default_rng(8)
    bg, x = rng.normal(size=(2, 9))
    assert np.array_equal(E.exact_shapley(f, bg, x).phi, E.exact_shapley(f, bg, x).phi)


def test_multi_row_background_averages():
    f = _mlp(9, d=4)
    rng = np.random.default_rng(10)
    bgs = rng.normal(size=(3, 4))
    x = rng.normal(size=4)
    exp = E.exact_shapley(f, bgs, x)
    mean_phi = np.mean([E.exact_shapley(f, b, x).phi for b in bgs], axis=0)
    np.testing.assert_allclose(exp.phi, mean_phi, atol=1e-12)


def test_coalition_weights_sum_to_one():
    for d in range(1, 10):
        w = E.coalition_weights(d)
        assert sum(comb(d - 1, k) * w[k] for k in range(d)) == pytest.approx(1.0)


def test_non_finite_output_names_coalition():
    def f(X):
        X = np.atleast_2d(X)
        out = X.sum(axis=1)
        out[(X[:, 0] == 1.0) & (X[:, 2] == 1.0)] = np.nan
        return out

    with pytest.raises(E.NonFiniteOutputError) as info:
        E.exact_shapley(f, np.zeros(3), np.ones(3))
    assert info.value.coalition == (0, 2)


# --- summaries ----------------------------------------------------------------


def _exp(phi):
    return E.ShapExplanation(np.asarray(phi, dtype=float), 0.0, float(np.sum(phi)), ("a", "b", "c"))


def test_summary_single():
    s = E.impact_summary([_exp([0.1, -0.5, 0.3])])
    assert s.ranking == ("b", "c", "a")


def test_summary_uses_absolute_values():
    s = E.impact_summary([_exp([1.0, 0.2, 0.0]), _exp([-1.0, 0.2, 0.0])])
    assert s.mean_abs_phi[0] == 1.0
    assert s.ranking[0] == "a"
    assert s.to_csv().splitlines()[0] == "feature,mean_abs_phi"


def test_summary_empty():
    with pytest.raises(ValueError):
        E.impact_summary([])


def test_zero_crossings_and_dtw_rank_top_two():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(120, 9))
    zc, dtw = FEATURE_NAMES.index("zero_crossings"), FEATURE_NAMES.index("dtw")
    y = np.where(X[:, zc] - X[:, dtw] > 0, 1, -1)
    ds = Dataset(X, y)
    model = train_svm(standardize(ds), KernelSpec("rbf"), C=10.0)
    exps = E.explain_dataset(model, X[:40])
    summary = E.impact_summary(exps)
    assert set(summary.ranking[:2]) == {"zero_crossings", "dtw"}
    assert sorted(summary.ranking) == sorted(FEATURE_NAMES)
    for e in exps:
        assert e.phi.sum() + e.base_value == pytest.approx(e.model_output, abs=1e-6)
