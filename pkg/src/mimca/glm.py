"""Main-effects binary logistic regression on dummy-coded categorical data."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .data import MISSING, CategoricalTable
from .errors import DataError, NumericalError, SeparationError

SEPARATION_THRESHOLD = 30.0


@dataclass(frozen=True)
class ModelFormula:
    """``response == success ~ predictors`` with main effects only."""

    response: str
    success: str
    predictors: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if self.response in self.predictors:
            raise DataError("response cannot also be a predictor")
        if len(set(self.predictors)) != len(self.predictors):
            raise DataError("duplicated predictor")
        if not self.predictors:
            raise DataError("formula needs at least one predictor")

    @classmethod
    def parse(cls, text: str) -> "ModelFormula":
        """Parse ``"chd=Present ~ famhist + tobacco"``.

        Interaction terms (``:`` or ``*``) are rejected.
        """
        if "~" not in text:
            raise DataError(f"formula {text!r} lacks '~'")
        lhs, rhs = (s.strip() for s in text.split("~", 1))
        if "=" not in lhs:
            raise DataError(f"formula left side {lhs!r} must be response=category")
        response, success = (s.strip() for s in lhs.split("=", 1))
        if re.search(r"[:*^]", rhs):
            raise DataError("only main effects are supported")
        preds = [p.strip() for p in rhs.split("+")]
        if not response or not success or any(not p for p in preds):
            raise DataError(f"malformed formula {text!r}")
        return cls(response, success, tuple(preds))

    def __str__(self):
        return f"{self.response}={self.success} ~ {' + '.join(self.predictors)}"

    @property
    def variables(self) -> tuple[str, ...]:
        return (self.response,) + self.predictors


def n_parameters(table: CategoricalTable, formula: ModelFormula) -> int:
    return 1 + sum(table.variables[table.column(p)].n_categories - 1
                   for p in formula.predictors)


def coefficient_names(table: CategoricalTable, formula: ModelFormula) -> list[str]:
    names = ["(Intercept)"]
    for p in formula.predictors:
        var = table.variables[table.column(p)]
        names += [f"{p}{lab}" for lab in var.labels[1:]]
    return names


def build_design(table: CategoricalTable, formula: ModelFormula):
    """Design matrix (intercept + reference-coded dummies) and 0/1 response.

    The reference category of each predictor is its first label.
    """
    r = table.column(formula.response)
    cols = [table.column(p) for p in formula.predictors]
    used = table.codes[:, [r] + cols]
    if np.any(used == MISSING):
        raise DataError("incomplete rows in analysis variables; impute first")
    labels = table.variables[r].labels
    if formula.success not in labels:
        raise DataError(
            f"success category {formula.success!r} not in {formula.response!r}")
    y = (table.codes[:, r] == labels.index(formula.success)).astype(float)
    blocks = [np.ones((table.n_rows, 1))]
    for k in cols:
        q = table.variables[k].n_categories
        blocks.append((table.codes[:, k][:, None] == np.arange(1, q)).astype(float))
    return np.hstack(blocks), y


@dataclass(frozen=True)
class LogisticFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    log_likelihood: float
    iterations: int
    n_obs: int

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def df_residual(self) -> int:
        return self.n_obs - self.coefficients.size

    def wald_interval(self, level: float = 0.95):
        from scipy.stats import norm
        z = norm.ppf(0.5 + level / 2)
        se = self.std_errors
        return self.coefficients - z * se, self.coefficients + z * se


def log_likelihood(beta, X, y) -> float:
    eta = X @ beta
    return float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))


def score(beta, X, y) -> np.ndarray:
    """Gradient of the log-likelihood."""
    return X.T @ (y - expit(X @ beta))


def information(beta, X) -> np.ndarray:
    """Negative Hessian of the log-likelihood."""
    p = expit(X @ beta)
    return (X * (p * (1 - p))[:, None]).T @ X


def fit_logistic(X, y, max_iter: int = 100, tol: float = 1e-8) -> LogisticFit:
    """Maximum-likelihood logistic regression by Newton-Raphson (IRLS).

    Steps that lower the log-likelihood are halved. Raises
    :class:`SeparationError` when a coefficient exceeds 30 in magnitude or the
    iteration does not converge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, P = X.shape
    if n <= P:
        raise DataError(f"need more rows ({n}) than parameters ({P})")
    if np.linalg.matrix_rank(X) < P:
        raise DataError("design matrix is rank deficient")
    beta = np.zeros(P)
    ll = log_likelihood(beta, X, y)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = score(beta, X, y)
        if np.linalg.norm(g) <= tol:
            converged = True
            break
        H = information(beta, X)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise SeparationError("separation: singular information matrix") from None
        t = 1.0
        for _ in range(50):
            cand = beta + t * step
            ll_new = log_likelihood(cand, X, y)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        beta, ll = cand, ll_new
        if np.max(np.abs(beta)) > SEPARATION_THRESHOLD:
            raise SeparationError(
                f"separation: |coefficient| > {SEPARATION_THRESHOLD:g}")
        if np.max(np.abs(t * step)) < 1e-14 * (1 + np.max(np.abs(beta))):
            converged = np.linalg.norm(score(beta, X, y)) <= max(tol, 1e-6)
            break
    if not converged:
        raise SeparationError("separation: IRLS did not converge")
    H = information(beta, X)
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise NumericalError("singular information matrix at the optimum") from None
    cov = (cov + cov.T) / 2
    return LogisticFit(beta, cov, converged, ll, it, n)


def fit_formula(table: CategoricalTable, formula: ModelFormula) -> LogisticFit:
    X, y = build_design(table, formula)
    return fit_logistic(X, y)
