import math

import numpy as np
import pytest

from funss.errors import ParameterError
from funss.fda import Grid, inner_product
from funss.rfpca import fpca_full
from funss.simgen import (
    SimDesign,
    TOY_DIRECTIONS,
    draw_scores,
    eigen_schedule,
    fourier_basis,
    fourier_capacity,
    synth_dataset,
    synth_regression,
    toy_example,
)


def test_fourier_values():
    L = 8
    t = Grid.uniform(L).points
    b = fourier_basis(L, 2)
    i = int(np.argmin(abs(t - 0.3125)))
    assert b[0, i] == pytest.approx(math.sqrt(2) * math.sin(2 * math.pi * t[i]))
    np.testing.assert_allclose(b[1], math.sqrt(2) * np.cos(4 * math.pi * t), atol=1e-15)
    # r = 1 at t = 0.25, on a grid whose midpoints include 0.25
    t2 = Grid.uniform(2).points
    assert t2[0] == 0.25 and fourier_basis(2, 1)[0, 0] == pytest.approx(math.sqrt(2))


def test_fourier_gram():
    g = Grid.uniform(1024)
    b = fourier_basis(1024, 50)
    gram = (b * g.weights) @ b.T
    assert np.abs(gram - np.eye(50)).max() <= 1e-6


def test_capacity_limit():
    assert fourier_capacity(256) == 127
    with pytest.raises(ParameterError):
        SimDesign(K=128, L=256)
    assert SimDesign(L=64).K == 31


def test_schedules():
    ed = eigen_schedule("ed", 10)
    assert ed[0] == 2.0 ** 50
    np.testing.assert_array_equal(ed[:-1] / ed[1:], 2.0)
    pd = eigen_schedule("pd", 4)
    assert pd[0] == 100.0 and pd[3] == pytest.approx(12.5)


def test_score_distributions():
    z = draw_scores("nu", 1000, 1000, 1)
    assert abs(z.mean()) <= 4e-3 and 0.99 <= z.var() <= 1.01
    m = draw_scores("mn", 1000, 1000, 2)
    assert 0.97 <= m.var() <= 1.03
    np.testing.assert_array_equal(draw_scores("vn", 50, 4, 3), draw_scores("vn", 50, 4, 3))


def test_single_component_rows():
    d = SimDesign("pd", "nu", K=1, N=5, L=16)
    x = synth_dataset(d, scores=np.ones((5, 1)))
    np.testing.assert_allclose(x.values, np.tile(10.0 * fourier_basis(16, 1), (5, 1)), rtol=1e-15)


def test_ed_leading_eigenvalue():
    meds = [fpca_full(synth_dataset(SimDesign("ed", "nu", N=10_000, L=256, seed=s)), 1).eigenvalues[0]
            for s in range(20)]
    assert abs(np.median(meds) / 2.0 ** 50 - 1) <= 0.1


def test_regression_noiseless_single():
    d = SimDesign("ed", "mn", K=1, N=50, L=32, seed=1)
    x, y, psi = synth_regression(d, noise_sd=0.0)
    xi = draw_scores("mn", 50, 1, 1)[:, 0]
    np.testing.assert_allclose(y.values, 2.0 ** 25 * xi, rtol=1e-12)


def test_regression_quadrature():
    d = SimDesign("pd", "nu", K=50, N=20, L=1024, seed=2)
    x, y, psi = synth_regression(d)
    xi = draw_scores("nu", 20, 50, 2)
    expect = xi @ np.sqrt(eigen_schedule("pd", 50))
    got = np.array([inner_product(row, psi, x.grid) for row in x.values])
    assert np.abs(got - expect).max() <= 1e-6 * max(1.0, np.abs(expect).max())
    noise = y.values - got
    assert np.std(noise) > 0.2


def test_toy_example():
    data, xi = toy_example(seed=3, return_scores=True)
    assert data.values.shape == (1000, 4)
    np.testing.assert_allclose(TOY_DIRECTIONS[0], [1 / math.sqrt(2)] * 2 + [0, 0])
    np.testing.assert_array_equal(data.values[:, 2], data.values[:, 3])
    np.testing.assert_allclose(data.values[:, 2], 0.1 * xi[:, 2] / math.sqrt(2), rtol=1e-14)


def test_covariance_convergence():
    d = SimDesign("pd", "nu", K=10, N=100_000, L=64, seed=5)
    x = synth_dataset(d)
    g = d.grid
    xw = x.values * g.sqrt_weights
    emp = xw.T @ xw / d.N
    bw = fourier_basis(64, 10) * g.sqrt_weights
    pop = (bw.T * eigen_schedule("pd", 10)) @ bw
    assert np.linalg.norm(emp - pop) / np.linalg.norm(pop) <= 0.05


def test_reproducible():
    d = SimDesign("ed", "vn", N=30, L=16, seed=9)
    np.testing.assert_array_equal(synth_dataset(d).values, synth_dataset(d).values)
    a, b = synth_regression(d)[1], synth_regression(d)[1]
    np.testing.assert_array_equal(a.values, b.values)
