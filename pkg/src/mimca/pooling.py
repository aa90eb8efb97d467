"""Rubin's rules for combining estimates across imputed data sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .errors import NumericalError


@dataclass(frozen=True)
class PooledEstimate:
    estimate: float
    within_variance: float
    between_variance: float
    total_variance: float
    df: float
    ci_low: float
    ci_high: float
    m: int
    name: str = ""

    @property
    def std_error(self) -> float:
        return float(np.sqrt(self.total_variance))

    @property
    def width(self) -> float:
        return self.ci_high - self.ci_low


def pool(estimates, variances):
    """Return ``(estimate, within, between, total)`` for one scalar quantity.

    ``total = within + (1 + 1/M) * between`` with ``between`` the sample
    variance (divisor ``M - 1``) of the estimates.
    """
    q = np.asarray(estimates, dtype=float)
    u = np.asarray(variances, dtype=float)
    m = q.size
    if m < 2:
        raise ValueError("pooling needs at least two imputations")
    if u.shape != q.shape:
        raise ValueError("estimates and variances differ in length")
    if np.any(u < 0):
        raise ValueError("variances must be nonnegative")
    qbar = float(q.mean())
    ubar = float(u.mean())
    # identical estimates: avoid a rounding residue from the mean
    b = 0.0 if np.ptp(q) == 0 else float(np.sum((q - qbar) ** 2) / (m - 1))
    return qbar, ubar, b, ubar + (1 + 1 / m) * b


def barnard_rubin_df(within: float, between: float, m: int, df_complete: float) -> float:
    """Small-sample degrees of freedom of Barnard and Rubin (1999)."""
    if within <= 0 and between <= 0:
        raise NumericalError("degenerate pooled variance")
    if df_complete <= 0:
        raise ValueError("complete-data degrees of freedom must be positive")
    total = within + (1 + 1 / m) * between
    df_obs = (df_complete + 1) / (df_complete + 3) * df_complete * within / total
    if between <= 0:
        return df_obs
    r = (1 + 1 / m) * between / within if within > 0 else np.inf
    df_old = (m - 1) * (1 + 1 / r) ** 2
    if within <= 0:
        # df_obs vanishes; only the large-sample term is informative
        return df_old
    return 1.0 / (1.0 / df_old + 1.0 / df_obs)


def t_quantile(prob: float, df: float) -> float:
    return float(student_t.ppf(prob, df))


def confidence_interval(estimate: float, total_variance: float, df: float,
                        level: float = 0.95):
    if total_variance < 0:
        raise ValueError("negative variance")
    if not df > 0:
        raise ValueError("degrees of freedom must be positive")
    half = t_quantile(1 - (1 - level) / 2, df) * np.sqrt(total_variance)
    return estimate - half, estimate + half


def pool_scalar(estimates, variances, df_complete: float, level: float = 0.95,
                name: str = "") -> PooledEstimate:
    qbar, ubar, b, total = pool(estimates, variances)
    m = len(estimates)
    df = barnard_rubin_df(ubar, b, m, df_complete)
    lo, hi = confidence_interval(qbar, total, df, level)
    return PooledEstimate(qbar, ubar, b, total, df, lo, hi, m, name)


def pool_fits(fits, names=None, level: float = 0.95) -> list[PooledEstimate]:
    """Pool per-coefficient results of several :class:`LogisticFit` objects.

    The complete-data degrees of freedom are ``N - P`` of the first fit.
    """
    fits = list(fits)
    est = np.array([f.coefficients for f in fits])
    var = np.array([np.diag(f.covariance) for f in fits])
    df_com = fits[0].df_residual
    names = names or [f"b{j}" for j in range(est.shape[1])]
    return [pool_scalar(est[:, j], var[:, j], df_com, level, names[j])
            for j in range(est.shape[1])]
