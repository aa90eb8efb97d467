import numpy as np
import pytest

from mimca.data import MISSING, CategoricalTable, VariableMeta


def make_table(codes, n_categories=None, names=None):
    codes = np.asarray(codes)
    if n_categories is None:
        n_categories = [max(2, int(codes[:, k].max()) + 1) for k in range(codes.shape[1])]
    names = names or [f"v{k + 1}" for k in range(codes.shape[1])]
    variables = [VariableMeta(n, tuple(f"{n}_{j}" for j in range(q)))
                 for n, q in zip(names, n_categories)]
    return CategoricalTable(codes, variables)


def random_table(rng, n_rows, n_categories, missing_rate=0.0):
    codes = np.column_stack([rng.integers(0, q, n_rows) for q in n_categories])
    if missing_rate:
        hide = rng.random(codes.shape) < missing_rate
        codes = np.where(hide, MISSING, codes)
        # keep at least one observation per variable
        for k in range(codes.shape[1]):
            if np.all(codes[:, k] == MISSING):
                codes[0, k] = 0
    return make_table(codes, n_categories)


def associated_table(rng, n_rows, n_categories, missing_rate=0.0, noise=0.3):
    """Variables driven by a shared latent score, so they are associated."""
    f = rng.standard_normal(n_rows)
    cols = []
    for q in n_categories:
        latent = f + noise * rng.standard_normal(n_rows)
        cuts = np.quantile(latent, np.linspace(0, 1, q + 1)[1:-1])
        cols.append(np.searchsorted(cuts, latent))
    codes = np.column_stack(cols)
    if missing_rate:
        codes = np.where(rng.random(codes.shape) < missing_rate, MISSING, codes)
    return make_table(codes, n_categories)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
