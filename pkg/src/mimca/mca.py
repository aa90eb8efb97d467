"""Weighted multiple correspondence analysis.

MCA is computed as the SVD of the triplet ``(Z - M, metric, row weights)``
where the column metric is ``1 / (K p_j)``. Realization: with normalized
weights ``w``, take the thin SVD of ``diag(sqrt(w)) (Z - M) diag(sqrt(metric))``
and map the singular vectors back through the inverse square roots. Rows with
zero weight do not enter the decomposition; they are projected afterwards as
supplementary individuals.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import column_proportions
from .errors import DataError

log = logging.getLogger(__name__)

RANK_CUTOFF = 1e-12


@dataclass(frozen=True)
class TripletSpec:
    """Input of :func:`weighted_svd_triplet`.

    ``data`` is the centered matrix ``Z - M``; ``centering`` (the row of
    ``M``) is carried along only so the fitted model can reconstruct ``Z``.
    """

    data: np.ndarray
    column_metric: np.ndarray
    row_weights: np.ndarray
    n_variables: int
    centering: np.ndarray | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        metric = np.asarray(self.column_metric, dtype=float)
        w = np.asarray(self.row_weights, dtype=float)
        if not np.all(metric > 0) or not np.all(np.isfinite(metric)):
            raise DataError("column metric must be positive and finite")
        if np.any(w < 0) or not w.sum() > 0:
            raise DataError("row weights must be nonnegative with positive sum")
        data = np.asarray(self.data, dtype=float)
        if data.shape != (w.size, metric.size):
            raise DataError("triplet dimensions disagree")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "column_metric", metric)
        object.__setattr__(self, "row_weights", w)


@dataclass(frozen=True)
class McaModel:
    centering: np.ndarray
    proportions: np.ndarray
    row_weights: np.ndarray
    left: np.ndarray
    right: np.ndarray
    singular: np.ndarray
    rank: int
    tail_mean: float
    n_variables: int
    eigenvalues: np.ndarray = field(repr=False, default=None)
    warnings: tuple[str, ...] = ()

    @property
    def column_metric(self) -> np.ndarray:
        return 1.0 / (self.n_variables * self.proportions)

    def truncate(self, rank: int) -> "McaModel":
        """Model restricted to its first ``rank`` dimensions."""
        if rank > self.rank:
            raise ValueError("cannot extend a truncated model")
        n_free = self.eigenvalues.size
        tail = _tail_mean(self.eigenvalues, rank, n_free)
        return McaModel(self.centering, self.proportions, self.row_weights,
                        self.left[:, :rank], self.right[:, :rank],
                        self.singular[:rank], rank, tail, self.n_variables,
                        self.eigenvalues, self.warnings)


def _tail_mean(eigenvalues: np.ndarray, rank: int, n_free: int) -> float:
    if rank >= n_free:
        return 0.0
    return float(eigenvalues[rank:n_free].sum() / (n_free - rank))


def mca_triplet(values: np.ndarray, spans, row_weights=None) -> TripletSpec:
    """Build the MCA triplet of a fully specified (possibly fuzzy) matrix.

    Category proportions and centering use the same row weights as the fit.
    Proportions at or below ``1 / (2 I_eff)`` (categories emptied by a
    bootstrap draw, or pushed negative by fuzzy values) are floored there for
    the metric only.
    """
    values = np.asarray(values, dtype=float)
    I, J = values.shape
    w = np.full(I, 1.0 / I) if row_weights is None else np.asarray(row_weights, float)
    w = w / w.sum()
    p = column_proportions(values, w)
    K = len(spans)
    floor = 1.0 / (2.0 * np.count_nonzero(w))
    warnings = ()
    low = p < floor
    if low.any():
        cols = np.flatnonzero(low).tolist()
        msg = f"empty categories {cols} floored at proportion {floor:.3g}"
        log.debug(msg)
        warnings = (msg,)
    metric = 1.0 / (K * np.maximum(p, floor))
    return TripletSpec(values - p, metric, w, K, centering=p, warnings=warnings)


def weighted_svd_triplet(spec: TripletSpec, rank: int) -> McaModel:
    """SVD of a matrix triplet under row weights and a diagonal column metric.

    Returns left vectors orthonormal under ``diag(w)``, right vectors
    orthonormal under ``diag(metric)``. Zero-weight rows get left coordinates
    by projection onto the fitted axes.
    """
    A = spec.data
    I, J = A.shape
    K = spec.n_variables
    n_free = J - K
    if rank < 0 or rank > n_free:
        raise DataError(f"rank {rank} outside [0, J-K={n_free}]")
    w = spec.row_weights / spec.row_weights.sum()
    active = w > 0
    sw = np.sqrt(w[active])
    sm = np.sqrt(spec.column_metric)
    B = sw[:, None] * A[active] * sm[None, :]
    Ub, s, Vbt = np.linalg.svd(B, full_matrices=False)

    eig = np.zeros(max(n_free, 0))
    m = min(s.size, n_free)
    eig[:m] = s[:m] ** 2
    sing = s[:rank].copy()
    if sing.size and sing[0] > 0:
        sing[sing < RANK_CUTOFF * sing[0]] = 0.0
    else:
        sing[:] = 0.0

    right = Vbt[:rank].T / sm[:, None]
    left = np.zeros((I, rank))
    left[active] = Ub[:, :rank] / sw[:, None]
    if not active.all():
        inv = np.divide(1.0, sing, out=np.zeros_like(sing), where=sing > 0)
        left[~active] = (A[~active] * spec.column_metric) @ right * inv

    centering = (np.zeros(J) if spec.centering is None
                 else np.asarray(spec.centering, dtype=float))
    proportions = 1.0 / (K * spec.column_metric)
    return McaModel(centering=centering, proportions=proportions,
                    row_weights=w, left=left, right=right, singular=sing,
                    rank=rank, tail_mean=_tail_mean(eig, rank, n_free),
                    n_variables=K, eigenvalues=eig, warnings=spec.warnings)


def fit_mca(values: np.ndarray, spans, rank: int, row_weights=None) -> McaModel:
    return weighted_svd_triplet(mca_triplet(values, spans, row_weights), rank)


def fit_reconstruct(values: np.ndarray, weights: np.ndarray, n_variables: int,
                    rank: int, shrunk: bool) -> tuple[np.ndarray, bool]:
    """Same result as ``reconstruct(fit_mca(...), shrunk)`` without building a model.

    Inner step of the iterative imputation. ``weights`` must already be
    normalized and ``rank`` valid; nothing is checked. Also returns whether a
    category proportion was floored.
    """
    p = weights @ values
    floor = 0.5 / np.count_nonzero(weights)
    floored = bool(p.min() < floor)
    metric = 1.0 / (n_variables * np.maximum(p, floor))
    A = values - p
    active = weights > 0
    sm = np.sqrt(metric)
    sw = np.sqrt(weights[active])
    _, s, vt = np.linalg.svd(sw[:, None] * A[active] * sm, full_matrices=False)
    d = s[:rank].copy()
    if d.size and d[0] > 0:
        d[d < RANK_CUTOFF * d[0]] = 0.0
    else:
        d[:] = 0.0
    right = vt[:rank].T / sm[:, None]
    # projecting every row gives U / sqrt(w) on active rows and the
    # supplementary coordinates elsewhere
    inv = np.zeros_like(d)
    inv[d > 0] = 1.0 / d[d > 0]
    left = (A * metric) @ right * inv
    if shrunk:
        n_free = values.shape[1] - n_variables
        tail = (float(np.sum(s[rank:n_free] ** 2)) / (n_free - rank)
                if rank < n_free else 0.0)
        d = shrink_singular_values(d, tail)
    return (left * d) @ right.T + p, floored


def shrink_singular_values(singular, tail_mean: float) -> np.ndarray:
    """Replace each singular value ``d`` by ``(d**2 - tail_mean) / d``.

    ``tail_mean`` is the mean of the discarded eigenvalues. Zero singular
    values stay zero and results are clipped at zero.
    """
    d = np.asarray(singular, dtype=float)
    if tail_mean < 0:
        raise ValueError("tail_mean must be nonnegative")
    if tail_mean == 0:
        return d.copy()
    out = np.divide(d * d - tail_mean, d, out=np.zeros_like(d), where=d > 0)
    return np.maximum(out, 0.0)


def reconstruct(model: McaModel, shrunk: bool = False) -> np.ndarray:
    """Reconstruction formula ``U diag(d) V^T + M``."""
    d = (shrink_singular_values(model.singular, model.tail_mean)
         if shrunk else model.singular)
    return (model.left * d) @ model.right.T + model.centering


def mca_param_count(I: int, J: int, K: int, S: int) -> int:
    return (J - K) + S * (I - 1 + (J - K) - S)


def normal_param_count(J: int, K: int) -> int:
    d = J - K
    return d * (d + 1) // 2 + d


def loglinear_twoway_param_count(n_categories) -> int:
    """Independent parameters of the loglinear model with all two-way terms."""
    free = [int(q) - 1 for q in n_categories]
    main = sum(free)
    pairs = sum(free[a] * free[b] for a in range(len(free))
                for b in range(a + 1, len(free)))
    return main + pairs


def loglinear_saturated_param_count(n_categories) -> int:
    return int(np.prod([int(q) for q in n_categories], dtype=object)) - 1
