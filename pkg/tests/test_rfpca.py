import warnings

import numpy as np
import pytest

from funss.diagnostics import covariance_error, subspace_error
from funss.errors import InvalidDrawError, ParameterError
from funss.fda import FunctionalDataset, Grid, center
from funss.rfpca import (
    cov_subsampled,
    factor_eigenpairs,
    fpca_full,
    fpca_randomized,
    fpca_sketch,
    full_sketch,
    fve,
)
from funss.sampling import (
    SamplerKind,
    SamplingDistribution,
    SubsampleDraw,
    draw_with_replacement,
    prob_impo,
    prob_uniform,
)
from funss.simgen import SimDesign, synth_dataset

from conftest import random_dataset


def _dense_cov(data):
    return data.values.T @ data.values / data.N


def test_fpca_full_rank_one():
    g = Grid.uniform(6)
    x = np.array([1.0, -2, 0.5, 3, 0, 1])
    d = FunctionalDataset(g, np.vstack([x] * 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = fpca_full(d, 1)
    nx = np.sqrt(np.sum(g.weights * x * x))
    assert m.eigenvalues[0] == pytest.approx(nx ** 2, rel=1e-12)
    np.testing.assert_allclose(m.eigenfunctions[0], x / nx, atol=1e-12)


def test_fpca_full_dense_oracle():
    d = random_dataset(30, 12, seed=5, weights="random")
    m = fpca_full(d, 6)
    # whitened dense oracle: W^1/2 K W^1/2
    sw = d.grid.sqrt_weights
    a = sw[:, None] * _dense_cov(d) * sw[None, :]
    lam, v = np.linalg.eigh(a)
    lam, v = lam[::-1][:6], v[:, ::-1][:, :6]
    np.testing.assert_allclose(m.eigenvalues, lam, rtol=1e-9)
    oracle = type(m)(lam, (v / sw[:, None]).T, d.grid)
    op, hs = subspace_error(m, oracle, 6)
    assert hs <= 1e-9


def test_fpca_truncation_warning():
    g = Grid.uniform(5)
    d = FunctionalDataset(g, np.vstack([np.arange(5.0), -np.arange(5.0)]))
    with pytest.warns(RuntimeWarning):
        m = fpca_full(d, 2)
    assert m.truncated and m.rank == 1


def test_gram_and_normal_paths_agree():
    rng = np.random.default_rng(2)
    s = rng.standard_normal((10, 40))
    lam1, v1 = factor_eigenpairs(s, 5)           # Gram path (m < L)
    lam2, v2 = factor_eigenpairs(s.T.copy(), 5)  # normal path on the transpose
    lam3 = np.linalg.eigvalsh(s.T @ s)[::-1][:5]
    np.testing.assert_allclose(lam1, lam3, rtol=1e-10)
    np.testing.assert_allclose(lam2, lam3, rtol=1e-10)
    np.testing.assert_allclose(v1.T @ v1, np.eye(5), atol=1e-12)


def test_sketch_matches_explicit_sum():
    d = random_dataset(3, 5, seed=3, weights="random")
    draw = SubsampleDraw([2, 0], [0.2, 0.5])
    k = cov_subsampled(d, draw).kernel()
    x = d.values
    expect = (np.outer(x[2], x[2]) / (3 * 0.2) + np.outer(x[0], x[0]) / (3 * 0.5)) / 2
    np.testing.assert_allclose(k, expect, rtol=1e-12, atol=1e-12)
    u = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(cov_subsampled(d, draw).apply(u), expect @ (d.grid.weights * u),
                               rtol=1e-12)


def test_identity_draw_is_full_covariance(small):
    draw = SubsampleDraw.exhaustive(small.N)
    k = cov_subsampled(small, draw).kernel()
    assert np.max(np.abs(k - _dense_cov(small))) <= 1e-12 * np.abs(_dense_cov(small)).max()
    full = fpca_full(small, 4)
    sub = fpca_sketch(cov_subsampled(small, draw), 4)
    np.testing.assert_allclose(sub.eigenvalues, full.eigenvalues, rtol=1e-9)
    np.testing.assert_allclose(sub.eigenfunctions, full.eigenfunctions, atol=1e-9)


def test_invalid_draw(small):
    with pytest.raises(InvalidDrawError):
        cov_subsampled(small, SubsampleDraw([small.N], [0.5]))


def test_unbiased_mean_sketch():
    d = random_dataset(40, 8, seed=8)
    dist = prob_impo(d)
    cov = _dense_cov(d)
    mean = np.zeros_like(cov)
    for s in range(2000):
        mean += cov_subsampled(d, draw_with_replacement(dist, 10, s)).kernel()
    mean /= 2000
    assert np.linalg.norm(mean - cov) <= 0.05 * np.linalg.norm(cov)


def test_point_mass_randomized(small):
    p = np.zeros(small.N)
    p[4] = 1.0
    dist = SamplingDistribution(p, SamplerKind.IMPO)
    m = fpca_randomized(small, dist, 5, 1, seed=0)
    x = small.values[4]
    cos = abs(np.sum(small.grid.weights * x * m.eigenfunctions[0])) / np.sqrt(small.sqnorms[4])
    assert cos == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ParameterError):
        fpca_randomized(small, dist, 1, 2, seed=0)


def test_fve(small):
    m = fpca_full(small)
    assert fve(small, m, m.rank) == pytest.approx(1.0, abs=1e-10)
    assert fve(small, m, 0) == 0.0
    lam = m.eigenvalues
    assert fve(small, m, 3) == pytest.approx(lam[:3].sum() / lam.sum(), rel=1e-8)
    zero = FunctionalDataset(small.grid, np.zeros((2, small.L)))
    with pytest.raises(ParameterError):
        fve(zero, m, 1)


def test_weyl_and_fve_gap():
    d = center(synth_dataset(SimDesign("pd", "nu", N=300, L=32, seed=1)))
    full = fpca_full(d)
    ref = full_sketch(d)
    dist = prob_uniform(d.N)
    for s in range(100):
        sk = cov_subsampled(d, draw_with_replacement(dist, 60, s))
        m = fpca_sketch(sk, 4)
        e_op, _ = covariance_error(ref, sk)
        assert np.max(np.abs(m.eigenvalues - full.eigenvalues[:4])) <= e_op * (1 + 1e-10)
        p_op, _ = subspace_error(full, m, 4)
        assert abs(fve(d, full, 4) - fve(d, m, 4)) <= p_op + 1e-12


def test_funprinss_beats_unif_subspace():
    d = center(synth_dataset(SimDesign("ed", "nu", N=2000, L=128, seed=2)))
    full = fpca_full(d)
    from funss.sampling import estimate_funprinss
    errs = {"unif": [], "funprinss": []}
    for s in range(200):
        for name in errs:
            dist = prob_uniform(d.N) if name == "unif" else estimate_funprinss(d, 1000, 5, seed=10_000 + s)
            m = fpca_randomized(d, dist, 1000, 5, seed=s)
            errs[name].append(subspace_error(full, m, 5)[0])
    assert np.median(errs["funprinss"]) < np.median(errs["unif"])


@pytest.mark.parametrize("kind", ["ed", "pd"])
def test_lanczos_paths_match_dense(kind):
    d = center(synth_dataset(SimDesign(kind, "nu", N=3000, L=200, seed=4)))
    for sketch in (full_sketch(d), cov_subsampled(d, draw_with_replacement(prob_impo(d), 600, 1))):
        a = sketch.normal_matrix
        lam, vec = np.linalg.eigh(a)
        lam, vec = lam[::-1][:5], vec[:, ::-1][:, :5]
        m = fpca_sketch(sketch, 5) if sketch.draw is not None else fpca_full(d, 5)
        np.testing.assert_allclose(m.eigenvalues, lam, rtol=1e-10)
        overlap = np.abs(np.sum(m.whitened * vec, axis=0))
        np.testing.assert_allclose(overlap, 1.0, atol=1e-8)
        gram = m.whitened.T @ m.whitened
        assert np.abs(gram - np.eye(5)).max() <= 1e-12
