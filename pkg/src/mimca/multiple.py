"""Multiple imputation by bootstrap-weighted MCA, plus the naive baselines."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (MISSING, CategoricalTable, encode_disjunctive, write_table)
from .errors import DataError, NumericalError
from .iterative import IterativeConfig, iterative_mca

log = logging.getLogger(__name__)


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def bootstrap_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Weights proportional to multiplicities of ``n`` draws with replacement."""
    if n < 1:
        raise ValueError("need at least one row")
    counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
    return counts / n


def coin_flip_probabilities(span) -> np.ndarray:
    p = np.clip(np.asarray(span, dtype=float), 0.0, 1.0)
    total = p.sum()
    if not total > 0:
        raise NumericalError("degenerate probabilities")
    return p / total


def coin_flip(span, rng: np.random.Generator, fallback=None) -> int:
    """Draw a category from a fuzzy indicator span.

    Entries are clamped to ``[0, 1]`` and rescaled to sum to one. A span that
    is all zero after clamping uses ``fallback`` probabilities when given.
    """
    try:
        p = coin_flip_probabilities(span)
    except NumericalError:
        if fallback is None:
            raise
        p = coin_flip_probabilities(fallback)
    return int(rng.choice(p.size, p=p))


@dataclass(frozen=True)
class ImputationDiagnostics:
    iterations: int
    converged: bool
    final_delta: float
    weights: np.ndarray = field(repr=False)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ImputationSet:
    tables: tuple[CategoricalTable, ...]
    method: str
    seed: int | None
    rank: int | None = None
    epsilon: float | None = None
    diagnostics: tuple[ImputationDiagnostics, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def m(self) -> int:
        return len(self.tables)

    def metadata(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "dims": self.rank,
            "m": self.m,
            "epsilon": self.epsilon,
            "variables": [{"name": v.name, "labels": list(v.labels)}
                          for v in self.tables[0].variables],
            "imputations": [
                {"index": i + 1, "iterations": d.iterations,
                 "converged": d.converged, "final_delta": d.final_delta,
                 "warnings": list(d.warnings)}
                for i, d in enumerate(self.diagnostics)],
            "warnings": list(self.warnings),
        }


def observed_proportions(table: CategoricalTable, k: int) -> np.ndarray:
    col = table.codes[:, k]
    col = col[col != MISSING]
    if col.size == 0:
        raise DataError(f"fully missing variable {table.variables[k].name!r}")
    counts = np.bincount(col, minlength=table.variables[k].n_categories)
    return counts / counts.sum()


def _one_imputation(table, z, rank, epsilon, max_iterations, regularized,
                    seed_seq, index):
    rng = np.random.default_rng(seed_seq)
    weights = bootstrap_weights(table.n_rows, rng)
    res = iterative_mca(z, IterativeConfig(rank, epsilon, max_iterations,
                                           regularized, weights))
    codes = np.array(table.codes)
    warnings = [f"imputation {index}: {w}" for w in res.warnings]
    values = res.completed.values
    for k, (a, b) in enumerate(z.spans):
        rows = np.flatnonzero(codes[:, k] == MISSING)
        if rows.size == 0:
            continue
        marg = None
        for i in rows:
            span = values[i, a:b]
            if not np.clip(span, 0, 1).sum() > 0:
                if marg is None:
                    marg = observed_proportions(table, k)
                warnings.append(
                    f"imputation {index}: degenerate span at row {i}, "
                    f"variable {table.variables[k].name!r}; used marginals")
            codes[i, k] = coin_flip(span, rng, fallback=marg)
    diag = ImputationDiagnostics(res.iterations, res.converged,
                                 res.final_delta, weights, tuple(warnings))
    return table.with_codes(codes), diag


def mimca(table: CategoricalTable, rank: int, m: int = 5, epsilon: float = 1e-6,
          seed=None, max_iterations: int = 1000, regularized: bool = True,
          threads: int = 1) -> ImputationSet:
    """Multiple imputation of a categorical table with MCA.

    Each of the ``m`` imputations draws bootstrap row weights, runs the
    weighted (regularized) iterative MCA on the incomplete disjunctive table,
    and samples every missing cell from its fitted span by coin flipping.
    Imputation ``i`` uses the ``i``-th child of the root seed, so results do
    not depend on ``threads``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    J = int(table.n_categories.sum())
    K = table.n_variables
    if not 1 <= rank <= J - K:
        raise DataError(f"dims must be in [1, J-K={J - K}], got {rank}")
    for k in range(K):
        if np.all(table.codes[:, k] == MISSING):
            raise DataError(f"fully missing variable {table.variables[k].name!r}")
    root = as_seed_sequence(seed)
    seed_value = root.entropy if isinstance(root.entropy, int) else None
    if table.is_complete():
        diag = ImputationDiagnostics(0, True, 0.0, np.full(table.n_rows, 1 / table.n_rows),
                                     ())
        return ImputationSet(tuple(table for _ in range(m)), "mimca", seed_value,
                             rank, epsilon, (diag,) * m, ("no missing values",))
    z = encode_disjunctive(table)
    children = root.spawn(m)
    args = [(table, z, rank, epsilon, max_iterations, regularized, children[i], i + 1)
            for i in range(m)]
    if threads > 1 and m > 1:
        with ThreadPoolExecutor(max_workers=min(threads, m)) as pool:
            results = list(pool.map(lambda a: _one_imputation(*a), args))
    else:
        results = [_one_imputation(*a) for a in args]
    tables = tuple(r[0] for r in results)
    diags = tuple(r[1] for r in results)
    warnings = tuple(w for d in diags for w in d.warnings)
    return ImputationSet(tables, "mimca", seed_value, rank, epsilon, diags, warnings)


def sample_impute(table: CategoricalTable, rng: np.random.Generator) -> CategoricalTable:
    """Draw each missing cell from its variable's observed category proportions."""
    codes = np.array(table.codes)
    for k in range(table.n_variables):
        miss = codes[:, k] == MISSING
        if not miss.any():
            continue
        p = observed_proportions(table, k)
        codes[miss, k] = rng.choice(p.size, size=int(miss.sum()), p=p)
    return table.with_codes(codes)


def listwise_delete(table: CategoricalTable) -> CategoricalTable:
    keep = ~table.missing.any(axis=1)
    if not keep.any():
        raise DataError("no complete rows")
    return table.take_rows(np.flatnonzero(keep))


def write_imputation_set(iset: ImputationSet, prefix, missing_token: str = "NA",
                         delimiter: str = ",") -> list[Path]:
    """Write ``<prefix>_imp<m>.csv`` files and a ``<prefix>_meta.json`` sidecar."""
    prefix = Path(prefix)
    ext = ".tsv" if delimiter == "\t" else ".csv"
    paths = []
    for i, t in enumerate(iset.tables, start=1):
        p = prefix.with_name(f"{prefix.name}_imp{i}{ext}")
        write_table(t, p, missing_token, delimiter)
        paths.append(p)
    meta = prefix.with_name(f"{prefix.name}_meta.json")
    meta.write_text(json.dumps(iset.metadata(), indent=2, sort_keys=True) + "\n")
    paths.append(meta)
    return paths
