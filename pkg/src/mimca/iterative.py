"""Single imputation of an incomplete disjunctive table by iterative MCA."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import IndicatorMatrix
from .errors import DataError
from .mca import McaModel, fit_mca, fit_reconstruct

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IterativeConfig:
    rank: int
    epsilon: float = 1e-6
    max_iterations: int = 1000
    regularized: bool = True
    row_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class IterativeResult:
    completed: IndicatorMatrix
    model: McaModel
    iterations: int
    final_delta: float
    converged: bool
    warnings: tuple[str, ...] = ()


def _weights(n_rows: int, row_weights) -> np.ndarray:
    if row_weights is None:
        return np.full(n_rows, 1.0 / n_rows)
    w = np.asarray(row_weights, dtype=float)
    if w.shape != (n_rows,):
        raise DataError("row_weights length must equal the number of rows")
    if np.any(w < 0) or not w.sum() > 0:
        raise DataError("row weights must be nonnegative with positive sum")
    return w / w.sum()


def initialize_missing(z: IndicatorMatrix, row_weights=None) -> IndicatorMatrix:
    """Fill masked spans with the weighted observed proportions of each variable.

    If every observed row of a variable has zero weight the unweighted observed
    proportions are used instead.
    """
    values = np.array(z.values, dtype=float)
    w = _weights(values.shape[0], row_weights)
    for k, (a, b) in enumerate(z.spans):
        obs = z.mask[:, a]
        if obs.all():
            continue
        if not obs.any():
            name = z.variables[k].name if z.variables else k
            raise DataError(f"fully missing variable {name!r}")
        wo = w[obs]
        if not wo.sum() > 0:
            wo = np.ones(obs.sum())
        props = (wo / wo.sum()) @ z.values[obs, a:b]
        values[~obs, a:b] = props
    return z.with_values(values)


def iterative_mca(z: IndicatorMatrix, cfg: IterativeConfig) -> IterativeResult:
    """Impute the masked cells of ``z`` with a rank-``cfg.rank`` MCA fit.

    Each iteration fits the MCA of the current completed table (centering and
    metric recomputed from it with the configured row weights), reconstructs it
    with raw or shrunk singular values, and copies the fitted values into the
    masked cells. Iteration stops once the summed squared change of the fitted
    matrix between two iterations is at most ``cfg.epsilon``.
    """
    J = z.values.shape[1]
    if cfg.rank > J - z.n_variables:
        raise DataError(
            f"rank {cfg.rank} exceeds J-K = {J - z.n_variables}")
    w = _weights(z.values.shape[0], cfg.row_weights)
    current = initialize_missing(z, w).values.copy()
    observed = z.mask
    fixed = z.values
    warnings: list[str] = []
    prev_fit = None
    delta = np.inf
    converged = False
    iteration = 0
    floored = False
    for iteration in range(1, cfg.max_iterations + 1):
        last_input = current
        fitted, low = fit_reconstruct(current, w, z.n_variables, cfg.rank,
                                      cfg.regularized)
        floored |= low
        current = np.where(observed, fixed, fitted)
        if prev_fit is not None:
            delta = float(np.sum((prev_fit - fitted) ** 2))
            if delta <= cfg.epsilon:
                converged = True
                break
        prev_fit = fitted
    # the model of the last iteration, for callers that need the axes
    model = fit_mca(last_input, z.spans, cfg.rank, w)
    if floored:
        warnings.append("empty categories floored during iterations")
    if not converged:
        msg = (f"iterative MCA did not converge in {cfg.max_iterations} "
               f"iterations (delta={delta:.3g})")
        log.warning(msg)
        warnings.append(msg)
    return IterativeResult(z.with_values(current), model, iteration, delta,
                           converged, tuple(warnings))
