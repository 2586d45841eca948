import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from funss.diagnostics import (
    covariance_error,
    eigfun_error,
    first_order_magnitude,
    flr_bound,
    fpca_bound,
    fve_gap_bound,
    linear_term_bound,
    residual_term_bound,
    linear_term,
    lowrank_norms,
    measured_beta,
    perturbation_report,
    pilot_beta,
    spectrum_stats,
    stats_from_eigenvalues,
    subspace_error,
    zc_hs_formula,
)
from funss.errors import EigengapError, ParameterError
from funss.fda import FunctionalDataset, Grid, SpectralModel, center
from funss.rfpca import cov_subsampled, fpca_full, full_sketch
from funss.sampling import SubsampleDraw, draw_with_replacement, prob_impo, prob_uniform
from funss.simgen import SimDesign, synth_dataset

from conftest import random_dataset

EIG = [4.0, 2.0, 1.0, 1.0]


def test_spectrum_stats_hand_values():
    s = stats_from_eigenvalues(EIG, 2)
    assert (s.g_R, s.G_R, s.delta_R, s.delta_0) == (1.0, 2.0, 2.0, 2.0)
    assert s.K_R == pytest.approx(15 * (1 + 4 / math.pi), rel=1e-12)
    assert abs(s.K_R - 34.0986) < 1e-4
    z = stats_from_eigenvalues([3.0, 1.0, 0.0], 2)
    assert z.delta_R == 0.0


def test_spectrum_stats_gap_warning():
    with pytest.warns(RuntimeWarning):
        s = stats_from_eigenvalues([2.0, 1.0, 1.0], 2)
    assert not s.eigengap_ok
    with pytest.raises(EigengapError):
        fpca_bound(s, 2, 1.0, 100, 0.1)


def _model(lam, phi, grid):
    return SpectralModel(lam, phi, grid)


def test_subspace_error_examples():
    g = Grid.uniform(8)
    e = np.eye(8) * np.sqrt(8)
    a = _model([2.0], e[:1], g)
    b = _model([1.0], e[1:2], g)
    assert subspace_error(a, a, 1) == pytest.approx((0.0, 0.0), abs=1e-14)
    op, hs = subspace_error(a, b, 1)
    assert op == pytest.approx(1.0, abs=1e-12) and hs == pytest.approx(math.sqrt(2), abs=1e-12)


def test_subspace_error_dense_oracle():
    d1 = random_dataset(30, 40, seed=1)
    d2 = random_dataset(30, 40, seed=2)
    m1, m2 = fpca_full(d1, 3), fpca_full(d2, 3)
    v1, v2 = m1.whitened, m2.whitened
    lam = np.linalg.eigvalsh(v2 @ v2.T - v1 @ v1.T)
    op, hs = subspace_error(m1, m2, 3)
    assert abs(op - np.abs(lam).max()) <= 1e-10
    assert abs(hs - np.sqrt(np.sum(lam ** 2))) <= 1e-10


def test_eigfun_error():
    g = Grid.uniform(8)
    u = np.sqrt(8) * np.eye(8)[0]
    v = np.sqrt(8) * np.eye(8)[1]
    assert eigfun_error(u, u, g) == 0.0
    assert eigfun_error(u, -u, g) == 0.0
    assert eigfun_error(u, v, g) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_covariance_error_paths():
    d = random_dataset(10, 30, seed=3)
    ref = full_sketch(d)
    sk = cov_subsampled(d, draw_with_replacement(prob_uniform(10), 5, 0))
    dense = sk.normal_matrix - ref.normal_matrix
    lam = np.linalg.eigvalsh(dense)
    op, hs = covariance_error(ref, sk)
    np.testing.assert_allclose([op, hs], [np.abs(lam).max(), np.sqrt((lam ** 2).sum())], rtol=1e-10)
    op2, hs2 = lowrank_norms([(sk.whitened.T, np.ones(5)), (ref.whitened.T, -np.ones(10))], 1000)
    np.testing.assert_allclose([op2, hs2], [op, hs], rtol=1e-10)


def _top_projector(a, R):
    lam, v = np.linalg.eigh(a)
    v = v[:, ::-1][:, :R]
    return v @ v.T


def test_linear_term_finite_difference():
    d = center(synth_dataset(SimDesign("pd", "nu", K=6, N=20, L=16, seed=5)))
    full = fpca_full(d)
    draw = draw_with_replacement(prob_impo(d), 12, 3)
    lt = linear_term(full, d, draw, 2)
    a = full_sketch(d).normal_matrix
    e = cov_subsampled(d, draw).normal_matrix - a
    h = 1e-5
    fd = (_top_projector(a + h * e, 2) - _top_projector(a - h * e, 2)) / (2 * h)
    dense = lt.basis @ lt.coef @ lt.basis.T
    assert np.max(np.abs(fd - dense)) <= 1e-6 * max(np.abs(dense).max(), 1.0)
    np.testing.assert_allclose(lt.zc_hs_sq, zc_hs_formula(full, d, draw, 2), rtol=1e-10)


def test_linear_term_zero_cases(small):
    full = fpca_full(small)
    lt = linear_term(full, small, SubsampleDraw.exhaustive(small.N), 3)
    assert lt.op_norm <= 1e-10
    # rank-R data: every row lies in the leading span, so no cross terms
    rng = np.random.default_rng(7)
    basis = np.linalg.qr(rng.standard_normal((small.L, 3)))[0].T
    lowrank = center(FunctionalDataset(small.grid, rng.standard_normal((40, 3)) @ basis * 5))
    f3 = fpca_full(lowrank)
    draw = draw_with_replacement(prob_impo(lowrank), 10, 1)
    lt = linear_term(f3, lowrank, draw, f3.rank)
    assert lt.op_norm <= 1e-12 * f3.eigenvalues.max()


def test_linear_term_needs_complete_model(small):
    with pytest.raises(ParameterError):
        linear_term(fpca_full(small, 3), small, SubsampleDraw.exhaustive(small.N), 3)


def test_perturbation_report_identity_and_bounds():
    d = center(synth_dataset(SimDesign("ed", "nu", N=300, L=32, seed=2)))
    full = fpca_full(d)
    rep = perturbation_report(d, full, SubsampleDraw.exhaustive(d.N), 3)
    assert rep.proj_op <= 1e-8 and rep.LR_op <= 1e-8 and rep.E_op <= 1e-12 * full.eigenvalues[0]
    st = spectrum_stats(full, 3)
    ref = full_sketch(d)
    for s in range(30):
        draw = draw_with_replacement(prob_uniform(d.N), 150, s)
        r = perturbation_report(d, full, draw, 3, reference=ref)
        assert r.SR_op <= residual_term_bound(st, r.E_op)
        assert r.LR_op <= linear_term_bound(st, r.E_op)
        assert r.eig_drift <= r.E_op * (1 + 1e-10)
        assert r.closure <= 1e-12
        assert fve_gap_bound(r) == r.proj_op


def test_fpca_bound_hand_arithmetic():
    mp.mp.dps = 40
    st = stats_from_eigenvalues(EIG, 2)
    b = fpca_bound(st, 2, 1.0, 10_000, 0.3)
    K = 15 * (1 + 4 / mp.pi)
    Z = mp.mpf(4)
    V = max(mp.mpf(2) ** 2 * Z ** 2 / 2, Z)
    L = max(2 * Z / mp.sqrt(2), Z + 1)
    eps = mp.mpf("0.3")
    bound = eps + K * 16 * eps ** 2 / 1
    prob = 1 - 12 * 4 * mp.exp(-(10_000 * eps ** 2 / 2) / (V + L * eps / 3))
    assert abs(b.error_bound - float(bound)) <= 1e-12 * float(bound)
    assert abs(b.success_prob - float(prob)) <= 1e-12
    assert (b.V, b.L) == pytest.approx((float(V), float(L)), rel=1e-14)
    assert b.eps_feasible


def test_fpca_bound_limits_and_boundary():
    st = stats_from_eigenvalues(EIG, 2)
    b = fpca_bound(st, 2, 1.0, 100, 1e-12)
    assert b.error_bound < 1e-11 and b.success_prob == 0.0
    C = 10_000
    eps = (math.sqrt(C * b.V) + b.L / 3) / C
    assert fpca_bound(st, 2, 1.0, C, eps).eps_feasible
    assert not fpca_bound(st, 2, 1.0, C, eps * (1 - 1e-9)).eps_feasible


def test_flr_bound_hand_arithmetic():
    mp.mp.dps = 40
    st = stats_from_eigenvalues(EIG, 2)
    b = flr_bound(st, 2, 1.0, 10_000, 0.2, 1.0, 0.5)
    K = 15 * (1 + 4 / mp.pi)
    Z1 = mp.mpf(4) ** 3 * K / (1 * 2)
    Z2 = mp.mpf(4)
    G = mp.mpf(2)
    V = 2 + (2 + G ** 2) * Z2 ** 2
    L = mp.sqrt(4) + (mp.sqrt(2) + G / mp.sqrt(2)) * Z2
    eps = mp.mpf("0.2")
    bound = (eps + mp.sqrt(2) * Z1 * eps ** 2 / 2) * 1 + 4 * (eps + Z1 * eps ** 2) * mp.mpf("0.5")
    prob = 1 - 16 * 4 * mp.exp(-10_000 * eps ** 2 / (V + L * eps / 3)) - 3 * Z2 / (eps ** 2 * 10_000)
    assert abs(b.error_bound - float(bound)) <= 1e-12 * float(bound)
    assert abs(b.success_prob - float(prob)) <= 1e-12
    assert b.eps_feasible == bool(eps >= mp.sqrt(V / 10_000) + L / 30_000 and eps <= mp.mpf(1) / 3)


def test_flr_bound_trivial_cases():
    st = stats_from_eigenvalues(EIG, 2)
    assert flr_bound(st, 2, 1.0, 100, 0.1, 0.0, 0.0).error_bound == 0.0
    b = flr_bound(st, 2, 1.0, 100, 0.01, 2.0, 0.0)
    Z1 = 64 * st.K_R / 2
    assert b.error_bound == pytest.approx((0.01 + math.sqrt(2) * Z1 * 1e-4 / 2) * 2.0, rel=1e-14)


def test_pilot_beta():
    mp.mp.dps = 40
    st = stats_from_eigenvalues(EIG, 2)
    pb = pilot_beta(st, 10 ** 6)
    g0 = mp.sqrt(3 * mp.log(240))
    K = 15 * (1 + 4 / mp.pi)
    g1 = 35 * 3 * 4 + 8 * 4 * g0 / 2
    g2 = 32 * K * 64 * 4 / 2
    t = g1 / mp.sqrt(10 ** 6) + g2 / 10 ** 6
    beta = (1 + t) / (1 - t)
    assert abs(pb.gamma0 - float(g0)) <= 1e-12 and abs(pb.beta - float(beta)) <= 1e-10
    assert not pilot_beta(st, 10).finite and math.isinf(pilot_beta(st, 10).beta)
    big = pilot_beta(st, 10 ** 12)
    assert abs(big.beta - 1) <= 1e-4 * big.gamma1
    betas = [pilot_beta(st, c).beta for c in (10 ** 6, 10 ** 7, 10 ** 8, 10 ** 9)]
    assert all(a > b for a, b in zip(betas, betas[1:]))


def test_measured_beta_and_magnitude():
    assert measured_beta([0.5, 0.5], [0.25, 0.75]) == 2.0
    st = stats_from_eigenvalues(EIG, 2)
    assert first_order_magnitude(st, 100) == pytest.approx(4 * math.sqrt(math.log(480)) / 10)


def test_fve_gap_audit():
    from funss.rfpca import fpca_randomized, fve
    d = center(synth_dataset(SimDesign("pd", "mn", N=400, L=32, seed=4)))
    full = fpca_full(d)
    dist = prob_impo(d)
    for s in range(100):
        sub = fpca_randomized(d, dist, 40, 3, s)
        gap = abs(fve(d, full, 3) - fve(d, sub, 3))
        assert gap <= subspace_error(full, sub, 3)[0] + 1e-12
