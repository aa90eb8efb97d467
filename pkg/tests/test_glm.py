import numpy as np
import pytest
from scipy.optimize import minimize

from mimca.data import CategoricalTable
from mimca.errors import DataError, SeparationError
from mimca.glm import (ModelFormula, build_design, coefficient_names, fit_formula,
                       fit_logistic, information, log_likelihood, n_parameters, score)


def logistic_data(rng, n=400, p=4):
    X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))])
    beta = rng.uniform(-1, 1, p)
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    return X, y


def test_score_and_information_match_finite_differences(rng):
    X, y = logistic_data(rng)
    b = rng.uniform(-0.5, 0.5, X.shape[1])
    h = 1e-6
    eye = np.eye(b.size)
    g_fd = np.array([(log_likelihood(b + h * e, X, y) - log_likelihood(b - h * e, X, y))
                     / (2 * h) for e in eye])
    np.testing.assert_allclose(score(b, X, y), g_fd, rtol=1e-6, atol=1e-6)
    H_fd = np.array([(score(b + h * e, X, y) - score(b - h * e, X, y)) / (2 * h)
                     for e in eye])
    np.testing.assert_allclose(-information(b, X), H_fd, rtol=1e-6, atol=1e-6)


def test_matches_generic_optimizer(rng):
    X, y = logistic_data(rng)
    fit = fit_logistic(X, y)
    res = minimize(lambda b: -log_likelihood(b, X, y), np.zeros(X.shape[1]),
                   jac=lambda b: -score(b, X, y), method="BFGS",
                   options={"gtol": 1e-10})
    np.testing.assert_allclose(fit.coefficients, res.x, atol=1e-4)
    assert fit.converged
    assert np.linalg.norm(score(fit.coefficients, X, y)) < 1e-6


def test_two_by_two_closed_form():
    # x = 0: 30 successes of 50; x = 1: 10 of 50
    x = np.repeat([0, 1], 50)
    y = np.r_[np.ones(30), np.zeros(20), np.ones(10), np.zeros(40)]
    X = np.column_stack([np.ones(100), x])
    fit = fit_logistic(X, y)
    np.testing.assert_allclose(fit.coefficients, [np.log(30 / 20), np.log(10 / 40 * 20 / 30)],
                               atol=1e-10)
    np.testing.assert_allclose(fit.std_errors[1], np.sqrt(1 / 30 + 1 / 20 + 1 / 10 + 1 / 40),
                               atol=1e-10)
    assert fit.df_residual == 98


def test_row_permutation_invariance(rng):
    X, y = logistic_data(rng)
    p = rng.permutation(len(y))
    a, b = fit_logistic(X, y), fit_logistic(X[p], y[p])
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-10)
    np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-10)


def test_duplication_halves_covariance(rng):
    X, y = logistic_data(rng)
    a = fit_logistic(X, y)
    b = fit_logistic(np.vstack([X, X]), np.r_[y, y])
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-9)
    np.testing.assert_allclose(b.covariance, a.covariance / 2, rtol=1e-8)


def test_separation_is_detected():
    x = np.r_[np.zeros(20), np.ones(20)]
    X = np.column_stack([np.ones(40), x])
    with pytest.raises(SeparationError):
        fit_logistic(X, x)


def test_rank_deficient_design(rng):
    X, y = logistic_data(rng)
    with pytest.raises(DataError, match="rank deficient"):
        fit_logistic(np.column_stack([X, X[:, 1]]), y)


def test_wald_interval(rng):
    X, y = logistic_data(rng)
    fit = fit_logistic(X, y)
    lo, hi = fit.wald_interval()
    np.testing.assert_allclose(hi - fit.coefficients, 1.959963984540054 * fit.std_errors)
    np.testing.assert_allclose(fit.coefficients - lo, hi - fit.coefficients)


def test_formula_parse():
    f = ModelFormula.parse("chd=Present ~ famhist + tobacco")
    assert f == ModelFormula("chd", "Present", ("famhist", "tobacco"))
    assert ModelFormula.parse(str(f)) == f
    for bad in ("y ~ a", "y=1 ~ a:b", "y=1 ~ a*b", "y=1", "y=1 ~ a + ", "y=1 ~ y"):
        with pytest.raises(DataError):
            ModelFormula.parse(bad)


def test_design_from_table():
    rows = [["yes", "a", "p"], ["no", "b", "q"], ["no", "c", "p"], ["yes", "a", "q"]]
    t = CategoricalTable.from_labels(rows, ["y", "x1", "x2"])
    f = ModelFormula.parse("y=yes ~ x1 + x2")
    X, y = build_design(t, f)
    np.testing.assert_array_equal(y, [1, 0, 0, 1])
    np.testing.assert_array_equal(X, [[1, 0, 0, 0], [1, 1, 0, 1], [1, 0, 1, 0], [1, 0, 0, 1]])
    assert n_parameters(t, f) == 4
    assert coefficient_names(t, f) == ["(Intercept)", "x1b", "x1c", "x2q"]
    with pytest.raises(DataError, match="success category"):
        build_design(t, ModelFormula.parse("y=maybe ~ x1"))
    t2 = CategoricalTable.from_labels(rows + [["no", None, "p"]], ["y", "x1", "x2"])
    with pytest.raises(DataError, match="incomplete"):
        build_design(t2, f)


def test_fit_formula_matches_design_fit(rng):
    n = 300
    a = rng.integers(0, 3, n)
    yv = rng.random(n) < np.array([0.3, 0.5, 0.7])[a]
    rows = [["yes" if yi else "no", f"a{ai}"] for yi, ai in zip(yv, a)]
    t = CategoricalTable.from_labels(rows, ["y", "a"], [["no", "yes"], ["a0", "a1", "a2"]])
    fit = fit_formula(t, ModelFormula.parse("y=yes ~ a"))
    X, y = build_design(t, ModelFormula.parse("y=yes ~ a"))
    np.testing.assert_allclose(fit.coefficients, fit_logistic(X, y).coefficients)


def test_balanced_no_association():
    # 2x2 table with 15/40 successes in both groups
    x = np.repeat([0, 1], 40)
    y = np.tile(np.r_[np.ones(15), np.zeros(25)], 2)
    fit = fit_logistic(np.column_stack([np.ones(80), x]), y)
    np.testing.assert_allclose(fit.coefficients, [np.log(15 / 25), 0.0], atol=1e-10)


def test_fifty_rows_match_optimizer(rng):
    for _ in range(3):
        X, y = logistic_data(rng, n=50, p=3)
        fit = fit_logistic(X, y)
        res = minimize(lambda b: -log_likelihood(b, X, y), np.zeros(3), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
        np.testing.assert_allclose(fit.coefficients, res.x, atol=1e-4)
