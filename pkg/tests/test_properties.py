import warnings

import numpy as np
from hypothesis import given, settings, strategies as st

from funss.diagnostics import subspace_error
from funss.fda import compute_scores, coefficients, projection_parts
from funss.io import read_dataset, write_dataset
from funss.rfpca import cov_subsampled, fpca_full, fpca_randomized
from funss.sampling import draw_with_replacement, prob_impo, prob_mixture, prob_uniform

from conftest import random_dataset

shapes = st.tuples(st.integers(3, 25), st.integers(2, 20), st.integers(0, 2 ** 32 - 1),
                   st.sampled_from(["uniform", "random"]))
fast = settings(max_examples=40, deadline=None)


@fast
@given(shapes)
def test_parseval(shape):
    N, L, seed, w = shape
    d = random_dataset(N, L, seed, weights=w)
    m = fpca_full(d)
    c = coefficients(d, m, m.rank)
    np.testing.assert_allclose((c ** 2).sum(axis=1), d.sqnorms, rtol=1e-9, atol=1e-12 * d.sqnorms.max())
    coef, res = projection_parts(d, m, min(2, m.rank))
    np.testing.assert_allclose((coef ** 2).sum(axis=1) + res, d.sqnorms, rtol=1e-9, atol=1e-12 * d.sqnorms.max())
    assert np.all(res >= 0)


@fast
@given(shapes)
def test_score_normalization(shape):
    N, L, seed, w = shape
    d = random_dataset(N, L, seed, weights=w)
    m = fpca_full(d)
    s = compute_scores(d, m, m.rank).scores
    np.testing.assert_allclose(s.T @ s / N, np.eye(m.rank), atol=1e-8)


@fast
@given(shapes, st.integers(1, 4))
def test_subspace_error_dense(shape, R):
    N, L, seed, w = shape
    R = min(R, L, N - 1)
    d = random_dataset(N, L, seed, weights=w)
    a = fpca_full(d, R)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        b = fpca_randomized(d, prob_uniform(N), max(R, N // 2), R, seed)
    if b.rank < R:
        return
    va, vb = a.whitened[:, :R], b.whitened[:, :R]
    lam = np.linalg.eigvalsh(vb @ vb.T - va @ va.T)
    op, hs = subspace_error(a, b, R)
    assert abs(op - np.abs(lam).max()) <= 1e-10
    assert abs(hs - np.sqrt((lam ** 2).sum())) <= 1e-10


@settings(max_examples=15, deadline=None)
@given(shapes, st.sampled_from([".fds", ".csv"]))
def test_file_round_trip(tmp_path_factory, shape, ext):
    N, L, seed, w = shape
    d = random_dataset(N, L, seed, centered=bool(seed % 2), weights=w)
    p = tmp_path_factory.mktemp("rt") / f"d{ext}"
    write_dataset(p, d)
    back = read_dataset(p)
    np.testing.assert_array_equal(back.values, d.values)
    np.testing.assert_array_equal(back.grid.weights, d.grid.weights)
    assert back.centered == d.centered


@fast
@given(shapes, st.floats(0, 1), st.integers(1, 60))
def test_seeded_determinism_and_probabilities(shape, alpha, C):
    N, L, seed, w = shape
    d = random_dataset(N, L, seed, weights=w)
    for dist in (prob_uniform(N), prob_impo(d), prob_mixture(d, alpha)):
        assert abs(dist.probs.sum() - 1) <= 1e-12 and np.all(dist.probs > 0)
        a = draw_with_replacement(dist, C, seed)
        b = draw_with_replacement(dist, C, seed)
        np.testing.assert_array_equal(a.indices, b.indices)
        assert a.indices.min() >= 0 and a.indices.max() < N
    s1 = cov_subsampled(d, a).normal_matrix
    s2 = cov_subsampled(d, b).normal_matrix
    np.testing.assert_array_equal(s1, s2)
