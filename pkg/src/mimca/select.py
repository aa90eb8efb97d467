"""Choice of the number of MCA dimensions by cross-validation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import MISSING, CategoricalTable, encode_disjunctive
from .errors import DataError
from .iterative import IterativeConfig, iterative_mca
from .multiple import as_seed_sequence


@dataclass(frozen=True)
class CrossValidationResult:
    best: int
    candidates: tuple[int, ...]
    mean_errors: np.ndarray
    errors: np.ndarray  # (repetitions, candidates)

    def table(self) -> list[tuple[int, float]]:
        return list(zip(self.candidates, self.mean_errors.tolist()))


def _mask_cells(table: CategoricalTable, n_mask: int, rng, max_retries: int):
    obs = np.argwhere(table.codes != MISSING)
    for _ in range(max_retries):
        pick = obs[rng.choice(len(obs), size=n_mask, replace=False)]
        codes = np.array(table.codes)
        codes[pick[:, 0], pick[:, 1]] = MISSING
        if np.all((codes != MISSING).any(axis=0)):
            return codes, pick
    raise DataError("masking would leave a variable without observed values")


def cross_validate_dims(table: CategoricalTable, candidates=(1, 2, 3, 4, 5),
                        repetitions: int = 5, add_fraction: float = 0.05,
                        seed=None, epsilon: float = 1e-6,
                        max_iterations: int = 1000, threads: int = 1,
                        max_retries: int = 100) -> CrossValidationResult:
    """Pick the dimension minimizing the prediction error of held-out cells.

    Each repetition hides ``add_fraction`` of the observed categorical cells,
    predicts their indicator entries with the regularized iterative MCA for
    every candidate, and records the mean squared error over those entries.
    Repetition ``r`` uses the ``r``-th child of the root seed, so the first
    repetitions agree whatever ``repetitions`` is. Ties go to the smaller
    dimension.
    """
    candidates = tuple(sorted(int(c) for c in candidates))
    if not candidates:
        raise ValueError("no candidate dimensions")
    if not 0 < add_fraction < 1:
        raise ValueError("add_fraction must be in (0, 1)")
    J = int(table.n_categories.sum())
    bound = J - table.n_variables
    if candidates[0] < 1 or candidates[-1] > bound:
        raise DataError(f"candidate dimensions must lie in [1, J-K={bound}]")
    truth = encode_disjunctive(table)
    n_obs = int(np.count_nonzero(table.codes != MISSING))
    n_mask = max(1, int(round(add_fraction * n_obs)))
    children = as_seed_sequence(seed).spawn(repetitions)

    masks = []
    for child in children:
        codes, pick = _mask_cells(table, n_mask, np.random.default_rng(child),
                                  max_retries)
        held = np.zeros(truth.values.shape, dtype=bool)
        for i, k in pick:
            a, b = truth.spans[k]
            held[i, a:b] = True
        masks.append((encode_disjunctive(table.with_codes(codes)), held))

    def run(job):
        r, c = job
        z, held = masks[r]
        res = iterative_mca(z, IterativeConfig(candidates[c], epsilon,
                                               max_iterations, True))
        diff = res.completed.values[held] - truth.values[held]
        return float(np.mean(diff ** 2))

    jobs = [(r, c) for r in range(repetitions) for c in range(len(candidates))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(run, jobs))
    else:
        flat = [run(j) for j in jobs]
    errors = np.array(flat).reshape(repetitions, len(candidates))
    means = errors.mean(axis=0)
    best = candidates[int(np.argmin(means))]
    return CrossValidationResult(best, candidates, means, errors)
