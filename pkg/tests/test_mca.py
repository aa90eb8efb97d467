import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimca.data import encode_disjunctive, span_sums
from mimca.errors import DataError
from mimca.mca import (TripletSpec, fit_mca, loglinear_twoway_param_count,
                       mca_param_count, mca_triplet, normal_param_count, reconstruct,
                       shrink_singular_values, weighted_svd_triplet)

from conftest import random_table


def eig_oracle(Z, spans, w, S):
    """Eigendecomposition of the metric-weighted cross-product matrix."""
    w = np.asarray(w, float) / np.sum(w)
    K = len(spans)
    m = w @ Z
    A = Z - m
    met = 1.0 / (K * m)
    C = (np.sqrt(met)[:, None] * A.T * w) @ (A * np.sqrt(met))
    ev, vec = np.linalg.eigh(C)
    order = np.argsort(ev)[::-1]
    ev, vec = ev[order], vec[:, order]
    P = vec[:, :S] @ vec[:, :S].T
    rec = m + (A * np.sqrt(met)) @ P / np.sqrt(met)
    return np.sqrt(np.clip(ev, 0, None)), rec


def test_matches_eigendecomposition_oracle(rng):
    for _ in range(5):
        t = random_table(rng, 40, [2, 3, 4, 3])
        z = encode_disjunctive(t)
        w = rng.random(40) + 0.1
        for S in (1, 3, 5):
            model = fit_mca(z.values, z.spans, S, w)
            sv, rec = eig_oracle(z.values, z.spans, w, S)
            np.testing.assert_allclose(model.singular, sv[:S], atol=1e-8)
            np.testing.assert_allclose(reconstruct(model), rec, atol=1e-8)


def test_orthonormality(rng):
    t = random_table(rng, 50, [3, 3, 2, 4])
    z = encode_disjunctive(t)
    w = rng.random(50)
    model = fit_mca(z.values, z.spans, 4, w)
    L, R = model.left, model.right
    np.testing.assert_allclose(L.T @ (model.row_weights[:, None] * L), np.eye(4), atol=1e-8)
    np.testing.assert_allclose(R.T @ (model.column_metric[:, None] * R), np.eye(4), atol=1e-8)
    assert np.all(np.diff(model.singular) <= 0) and np.all(model.singular >= 0)


def test_full_rank_reconstruction_is_exact(rng):
    t = random_table(rng, 30, [2, 3, 4])
    z = encode_disjunctive(t)
    model = fit_mca(z.values, z.spans, 9 - 3)
    np.testing.assert_allclose(reconstruct(model), z.values, atol=1e-9)


def test_exact_low_rank_matrix_has_zero_error(rng):
    # rows built as M + u v^T with v summing to zero per span: rank 1
    spans = ((0, 2), (2, 5))
    m = np.array([0.5, 0.5, 0.2, 0.3, 0.5])
    v = np.array([0.3, -0.3, 0.2, 0.1, -0.3])
    u = rng.standard_normal(20)
    u -= u.mean()
    Z = m + np.outer(u, v) * 0.5
    model = fit_mca(Z, spans, 1)
    np.testing.assert_allclose(reconstruct(model), Z, atol=1e-12)


def test_rank_error(rng):
    t = random_table(rng, 10, [2, 2])
    z = encode_disjunctive(t)
    with pytest.raises(DataError):
        fit_mca(z.values, z.spans, 3)


def test_duplicated_row_equals_doubled_weight(rng):
    t = random_table(rng, 25, [2, 3, 3])
    Z = encode_disjunctive(t).values
    spans = encode_disjunctive(t).spans
    dup = np.vstack([Z, Z[:1]])
    a = fit_mca(dup, spans, 3)
    w = np.ones(25)
    w[0] = 2
    b = fit_mca(Z, spans, 3, w)
    np.testing.assert_allclose(a.singular, b.singular, atol=1e-10)
    # right vectors agree up to sign
    signs = np.sign(np.sum(a.right * b.right, axis=0))
    np.testing.assert_allclose(a.right, b.right * signs, atol=1e-8)


@given(st.integers(0, 10**6), st.floats(0.01, 1000))
@settings(max_examples=25, deadline=None)
def test_weight_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    z = encode_disjunctive(random_table(rng, 20, [2, 3, 3]))
    w = rng.random(20) + 0.05
    a = fit_mca(z.values, z.spans, 2, w)
    b = fit_mca(z.values, z.spans, 2, c * w)
    np.testing.assert_allclose(a.singular, b.singular, atol=1e-10)
    np.testing.assert_allclose(np.abs(a.right), np.abs(b.right), atol=1e-8)
    np.testing.assert_allclose(np.abs(a.left), np.abs(b.left), atol=1e-8)


def test_supplementary_rows(rng):
    t = random_table(rng, 30, [3, 3, 2])
    z = encode_disjunctive(t)
    w = rng.random(30) + 0.1
    w[[3, 7, 11]] = 0.0
    model = fit_mca(z.values, z.spans, 2, w)
    rec = reconstruct(model)
    # active rows: same fit as dropping the supplementary rows entirely
    keep = w > 0
    sub = fit_mca(z.values[keep], z.spans, 2, w[keep])
    np.testing.assert_allclose(rec[keep], reconstruct(sub), atol=1e-10)
    # removing another zero-weight row leaves a supplementary row unchanged
    drop = np.ones(30, bool)
    drop[11] = False
    other = fit_mca(z.values[drop], z.spans, 2, w[drop])
    np.testing.assert_allclose(reconstruct(other)[3], rec[3], atol=1e-10)
    np.testing.assert_allclose(span_sums(rec, z.spans), 1.0, atol=1e-9)


def test_supplementary_projection_matches_formula(rng):
    t = random_table(rng, 30, [3, 3, 2])
    z = encode_disjunctive(t)
    w = np.ones(30)
    w[0] = 0
    model = fit_mca(z.values, z.spans, 2, w)
    u0 = (z.values[0] - model.centering) * model.column_metric @ model.right / model.singular
    np.testing.assert_allclose(model.left[0], u0, atol=1e-12)


def test_eckart_young_truncation_order(rng):
    t = random_table(rng, 40, [3, 4, 2, 3])
    z = encode_disjunctive(t)
    w = rng.random(40)
    full = fit_mca(z.values, z.spans, 6, w)

    def err(model):
        d = (z.values - reconstruct(model)) ** 2
        return float(model.row_weights @ d @ model.column_metric)

    errs = [err(full.truncate(s)) for s in range(7)]
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
    # weighted error of the rank-s fit is the tail eigenvalue sum
    np.testing.assert_allclose(errs[2], full.eigenvalues[2:].sum(), atol=1e-10)


def test_reconstruction_rank(rng):
    t = random_table(rng, 40, [3, 4, 2, 3])
    z = encode_disjunctive(t)
    for S in (1, 2, 4):
        model = fit_mca(z.values, z.spans, S)
        for shrunk in (False, True):
            centered = reconstruct(model, shrunk) - model.centering
            assert np.linalg.matrix_rank(centered, tol=1e-9) == S


def test_fuzzy_span_sums(rng):
    t = random_table(rng, 30, [2, 3, 5])
    Z = encode_disjunctive(t).values
    spans = encode_disjunctive(t).spans
    fuzzy = Z + 0.1 * rng.standard_normal(Z.shape)
    for a, b in spans:  # re-normalize spans to sum to one
        fuzzy[:, a:b] -= (fuzzy[:, a:b].sum(axis=1, keepdims=True) - 1) / (b - a)
    model = fit_mca(fuzzy, spans, 3, rng.random(30))
    for shrunk in (False, True):
        np.testing.assert_allclose(span_sums(reconstruct(model, shrunk), spans), 1.0,
                                   atol=1e-9)


def test_empty_category_is_floored(rng):
    t = random_table(rng, 20, [3, 2])
    z = encode_disjunctive(t)
    w = np.ones(20)
    w[t.codes[:, 0] == 2] = 0  # category 3 of v1 only in zero-weight rows
    spec = mca_triplet(z.values, z.spans, w)
    assert spec.warnings and "floored" in spec.warnings[0]
    assert np.isfinite(spec.column_metric).all()
    model = weighted_svd_triplet(spec, 2)
    np.testing.assert_allclose(span_sums(reconstruct(model), z.spans), 1.0, atol=1e-9)


def test_triplet_rejects_bad_metric():
    with pytest.raises(DataError):
        TripletSpec(np.zeros((2, 2)), [1.0, 0.0], [1, 1], 1)
    with pytest.raises(DataError):
        TripletSpec(np.zeros((2, 2)), [1.0, 1.0], [0, 0], 1)


def test_shrinkage_values():
    np.testing.assert_allclose(shrink_singular_values([2.0, 1.0], 1.0), [1.5, 0.0])
    np.testing.assert_array_equal(shrink_singular_values([3.0, 0.5], 0.0), [3.0, 0.5])


@given(st.lists(st.floats(0, 10), min_size=1, max_size=8), st.floats(0, 1))
def test_shrinkage_properties(values, frac):
    d = np.sort(np.array(values))[::-1]
    tail = frac * d[-1] ** 2
    out = shrink_singular_values(d, tail)
    assert np.all(out >= 0)
    assert np.all(out <= d + 1e-12)
    assert np.all(np.diff(out) <= 1e-12)


def test_shrinkage_with_empty_tail_is_identity(rng):
    t = random_table(rng, 30, [2, 3])
    z = encode_disjunctive(t)
    model = fit_mca(z.values, z.spans, 3)
    assert model.tail_mean == 0.0
    np.testing.assert_allclose(reconstruct(model, True), reconstruct(model), atol=1e-12)


def test_tail_mean_is_mean_of_discarded_eigenvalues(rng):
    t = random_table(rng, 50, [3, 4, 3])
    z = encode_disjunctive(t)
    model = fit_mca(z.values, z.spans, 2)
    ev = model.eigenvalues
    assert ev.size == 7
    assert model.tail_mean == pytest.approx(ev[2:].mean())


def test_parameter_counts():
    assert normal_param_count(50, 10) == 860
    assert loglinear_twoway_param_count([5] * 10) == 760
    assert mca_param_count(100, 50, 10, 2) == 314


def test_fit_reconstruct_matches_model_path(rng):
    from mimca.mca import fit_reconstruct
    for _ in range(20):
        t = random_table(rng, 30, [3, 3, 2, 4])
        z = encode_disjunctive(t)
        w = rng.random(30)
        w[rng.random(30) < 0.3] = 0.0
        w /= w.sum()
        for S in (1, 3, 8):
            for shrunk in (False, True):
                fast, floored = fit_reconstruct(z.values, w, 4, S, shrunk)
                model = fit_mca(z.values, z.spans, S, w)
                np.testing.assert_allclose(fast, reconstruct(model, shrunk), atol=1e-10)
                assert floored == bool(model.warnings)
