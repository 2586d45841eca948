"""Error metrics, first-order perturbation terms and bound formulas.

Every operator handled here has finite rank and lives in whitened
coordinates, where it is a sum of terms ``F D F^T`` with F tall (L x k).
Norms are computed on the joint column span of the factors: with Q an
orthonormal basis for ``[F_1, F_2, ...]`` the operator is represented by
the small symmetric matrix ``sum (Q^T F) D (Q^T F)^T``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DimensionError, EigengapError, ParameterError, RankDeficiencyError
from .fda import FunctionalDataset, Grid, SpectralModel
from .rfpca import WeightedSketch, cov_subsampled, fpca_sketch, full_sketch
from .sampling import SubsampleDraw


# ---------------------------------------------------------------------------
# spectrum statistics


@dataclass(frozen=True)
class SpectrumStats:
    """Eigenvalue summaries that enter the bound formulas at rank R."""

    R: int
    beta: float
    g_R: float
    G_R: float
    K_R: float
    delta_R: float
    delta_0: float
    sigma1_sq: float
    sigmaR_sq: float
    sigmaR1_sq: float

    @property
    def eigengap_ok(self) -> bool:
        return self.g_R > 0.0

    @property
    def dim(self) -> float:
        """``R + Delta_R``."""
        return self.R + self.delta_R


def stats_from_eigenvalues(eigenvalues, R: int, beta: float = 1.0,
                           trace: float | None = None) -> SpectrumStats:
    """Build ``SpectrumStats`` from a nonincreasing eigenvalue sequence.

    ``trace`` is the total variance; when it exceeds the sum of the given
    eigenvalues the excess is counted in the tail past rank R.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64).ravel()
    if not 1 <= R <= lam.size:
        raise ParameterError(f"R={R} outside 1..{lam.size}")
    if beta < 1.0:
        raise ParameterError(f"beta must be >= 1, got {beta}")
    if lam[0] <= 0.0:
        raise ParameterError("leading eigenvalue must be positive")
    total = float(lam.sum())
    extra = 0.0 if trace is None else float(trace) - total
    if extra <= 1e-12 * max(total, 1.0):
        extra = 0.0
    tail = float(lam[R:].sum()) + extra
    s1, sR = float(lam[0]), float(lam[R - 1])
    sR1 = float(lam[R]) if lam.size > R else 0.0
    g = sR - sR1
    delta_R = tail / sR1 if sR1 > 0.0 else 0.0
    delta_0 = (total + extra) / s1
    if g > 0.0:
        G = sR / g
        K = 15.0 * (1.0 + 2.0 * (s1 - sR) / (math.pi * g))
    else:
        warnings.warn(f"eigengap g_R = {g:.3g} <= 0 at R={R}; bound formulas do not apply",
                      RuntimeWarning, stacklevel=2)
        G = K = math.inf
    return SpectrumStats(R, float(beta), g, G, K, delta_R, delta_0, s1, sR, sR1)


def spectrum_stats(model: SpectralModel, R: int, beta: float = 1.0) -> SpectrumStats:
    return stats_from_eigenvalues(model.eigenvalues, R, beta, trace=model.trace)


# ---------------------------------------------------------------------------
# low-rank symmetric operators


def _joint_representation(terms, L: int):
    """Small symmetric matrix of ``sum F D F^T`` on the joint span.

    ``terms`` holds pairs (F, D) with F of shape (L, k) and D either a
    length-k vector (diagonal) or a k x k matrix.
    """
    terms = [(np.asarray(f, dtype=np.float64), np.asarray(d, dtype=np.float64))
             for f, d in terms if np.asarray(f).shape[1] > 0]
    if not terms:
        return np.zeros((0, 0))
    width = sum(f.shape[1] for f, _ in terms)
    q = None if width >= L else np.linalg.qr(np.hstack([f for f, _ in terms]))[0]
    m = 0.0
    for f, d in terms:
        g = f if q is None else q.T @ f
        m = m + ((g * d) @ g.T if d.ndim == 1 else g @ d @ g.T)
    return 0.5 * (m + m.T)


def lowrank_norms(terms, L: int) -> tuple[float, float]:
    """Operator and Hilbert-Schmidt norms of ``sum F D F^T``."""
    m = _joint_representation(terms, L)
    if m.size == 0:
        return 0.0, 0.0
    lam = np.linalg.eigvalsh(m)
    return float(np.max(np.abs(lam))), float(np.sqrt(np.sum(lam * lam)))


def _check_pair(a: SpectralModel, b: SpectralModel, R: int):
    if not a.grid.same_as(b.grid):
        raise DimensionError("models live on different grids")
    if R < 1 or a.rank < R or b.rank < R:
        raise ParameterError(f"both models need rank >= R={R} (have {a.rank}, {b.rank})")


def subspace_error(model_hat: SpectralModel, model_tilde: SpectralModel,
                   R: int) -> tuple[float, float]:
    """``(||P_tilde - P_hat||, ||P_tilde - P_hat||_HS)`` for rank-R projections."""
    _check_pair(model_hat, model_tilde, R)
    one = np.ones(R)
    return lowrank_norms([(model_tilde.whitened[:, :R], one),
                          (model_hat.whitened[:, :R], -one)], model_hat.grid.L)


def eigfun_error(theta_hat, theta_tilde, grid: Grid) -> float:
    """Sign-aligned distance ``||theta_tilde - sign(<theta_tilde, theta_hat>) theta_hat||``."""
    a = np.asarray(theta_hat, dtype=np.float64)
    b = np.asarray(theta_tilde, dtype=np.float64)
    if a.shape != (grid.L,) or b.shape != (grid.L,):
        raise DimensionError("eigenfunctions and grid differ in length")
    s = 1.0 if float(np.sum(grid.weights * a * b)) >= 0.0 else -1.0
    d = b - s * a
    return float(np.sqrt(np.sum(grid.weights * d * d)))


def covariance_error(reference: WeightedSketch, sketch: WeightedSketch) -> tuple[float, float]:
    """``(||C_tilde - C_hat||, ||C_tilde - C_hat||_HS)`` from the two factors."""
    if not reference.grid.same_as(sketch.grid):
        raise DimensionError("sketches live on different grids")
    L = reference.grid.L
    if reference.m + sketch.m >= L:
        e = sketch.whitened.T @ sketch.whitened - reference.normal_matrix
        lam = np.linalg.eigvalsh(0.5 * (e + e.T))
        return float(np.max(np.abs(lam))), float(np.sqrt(np.sum(lam * lam)))
    return lowrank_norms([(sketch.whitened.T, np.ones(sketch.m)),
                          (reference.whitened.T, -np.ones(reference.m))], L)


# ---------------------------------------------------------------------------
# first-order term


@dataclass(frozen=True, eq=False)
class LinearTerm:
    """First-order projection perturbation ``L_R(E)``.

    The operator is ``basis @ coef @ basis.T`` in whitened coordinates, with
    ``basis`` the full-sample eigenfunctions (L x K) and ``coef`` symmetric,
    nonzero only in the blocks coupling ranks ``r <= R`` with ``s > R``.
    ``zc_hs_sq[c]`` is ``||Z_c||_HS^2`` of each draw's summand.
    """

    basis: np.ndarray
    coef: np.ndarray
    R: int
    op_norm: float
    hs_norm: float
    zc_hs_sq: np.ndarray


def _require_complete(model: SpectralModel, dataset: FunctionalDataset):
    full = min(dataset.N, dataset.L)
    if model.requested_rank is not None and model.requested_rank < full and not model.truncated:
        raise ParameterError(
            "the first-order term needs every positive full-sample eigenpair; "
            "pass fpca_full(dataset) with R=None")


def _sketch_scores(model: SpectralModel, dataset: FunctionalDataset, draw: SubsampleDraw):
    sig = model.sigmas
    xi = dataset.whitened[draw.indices] @ model.whitened / sig
    return xi, sig


def _rank_gaps(sig2: np.ndarray, R: int) -> np.ndarray:
    gaps = sig2[:R, None] - sig2[None, R:]
    if np.any(gaps <= 0.0):
        raise EigengapError(f"eigengap at R={R} is not positive")
    return gaps


def linear_term(model: SpectralModel, dataset: FunctionalDataset, draw: SubsampleDraw,
                R: int) -> LinearTerm:
    """First-order term ``L_R(E) = (1/C) sum_c Z_c / (N p_c)``.

    ``model`` must hold every positive eigenpair of the full-sample
    covariance; eigenpairs past its rank carry zero eigenvalue and add
    nothing to the sum.
    """
    _require_complete(model, dataset)
    if not 1 <= R <= model.rank:
        raise ParameterError(f"R={R} outside 1..{model.rank}")
    K = model.rank
    coef = np.zeros((K, K))
    if K == R:
        return LinearTerm(model.whitened, coef, R, 0.0, 0.0, np.zeros(draw.C))
    sig2 = model.eigenvalues
    gaps = _rank_gaps(sig2, R)
    xi, sig = _sketch_scores(model, dataset, draw)
    factor = np.outer(sig[:R], sig[R:]) / gaps
    omega = 1.0 / (draw.C * dataset.N * draw.probs)
    block = factor * ((xi[:, :R] * omega[:, None]).T @ xi[:, R:])
    coef[:R, R:] = block
    coef[R:, :R] = block.T
    lam = np.linalg.eigvalsh(coef)
    # ||Z_c||_HS^2 through the summand's own matrix, (V^T V M_c)^2 traced.
    vtv = model.whitened.T @ model.whitened
    zc = np.empty(draw.C)
    for c in range(draw.C):
        mc = np.zeros((K, K))
        a = factor * np.outer(xi[c, :R], xi[c, R:])
        mc[:R, R:] = a
        mc[R:, :R] = a.T
        g = vtv @ mc
        zc[c] = float(np.trace(g @ g))
    return LinearTerm(model.whitened, coef, R, float(np.max(np.abs(lam))),
                      float(np.sqrt(np.sum(lam * lam))), zc)


def zc_hs_formula(model: SpectralModel, dataset: FunctionalDataset, draw: SubsampleDraw,
                  R: int) -> np.ndarray:
    """Closed-form double sum ``2 sum_r sum_s sigma_r^2 sigma_s^2 / (sigma_r^2 - sigma_s^2)^2 xi_cr^2 xi_cs^2``."""
    sig2 = model.eigenvalues
    if model.rank == R:
        return np.zeros(draw.C)
    w = np.outer(sig2[:R], sig2[R:]) / _rank_gaps(sig2, R) ** 2
    xi, _ = _sketch_scores(model, dataset, draw)
    return 2.0 * np.einsum("rs,cr,cs->c", w, xi[:, :R] ** 2, xi[:, R:] ** 2)


# ---------------------------------------------------------------------------
# perturbation report


@dataclass(frozen=True)
class PerturbationReport:
    E_op: float
    E_hs: float
    LR_op: float
    LR_hs: float
    SR_op: float
    proj_op: float
    proj_hs: float
    eig_drift: float
    closure: float


def perturbation_report(dataset: FunctionalDataset, model_hat: SpectralModel,
                        draw: SubsampleDraw, R: int,
                        reference: WeightedSketch | None = None) -> PerturbationReport:
    """Norms of ``E``, ``L_R(E)``, ``S_R(E)`` and ``P_tilde - P_hat`` for one draw.

    ``model_hat`` must be the complete full-sample FPCA; ``reference`` may
    carry its precomputed factor.
    """
    if reference is None:
        reference = full_sketch(dataset)
    sketch = cov_subsampled(dataset, draw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model_tilde = fpca_sketch(sketch, R)
    if model_tilde.rank < R:
        raise RankDeficiencyError(f"subsampled covariance has rank {model_tilde.rank} < R={R}")
    E_op, E_hs = covariance_error(reference, sketch)
    lt = linear_term(model_hat, dataset, draw, R)
    one = np.ones(R)
    vt, vh = model_tilde.whitened[:, :R], model_hat.whitened[:, :R]
    L = dataset.L
    width = 2 * R + lt.basis.shape[1]
    q = None if width >= L else np.linalg.qr(np.hstack([vt, vh, lt.basis]))[0]

    def rep(f, d):
        g = f if q is None else q.T @ f
        return (g * d) @ g.T if d.ndim == 1 else g @ d @ g.T

    m_proj = rep(vt, one) - rep(vh, one)
    m_lin = rep(lt.basis, lt.coef)
    m_res = m_proj - m_lin

    def norms(m):
        lam = np.linalg.eigvalsh(0.5 * (m + m.T))
        return float(np.max(np.abs(lam))), float(np.sqrt(np.sum(lam * lam)))

    proj_op, proj_hs = norms(m_proj)
    lr_op, lr_hs = norms(m_lin)
    sr_op, _ = norms(m_res)
    closure, _ = norms(m_proj - (m_lin + m_res))
    drift = float(np.max(np.abs(model_tilde.eigenvalues[:R] - model_hat.eigenvalues[:R])))
    return PerturbationReport(E_op, E_hs, lr_op, lr_hs, sr_op, proj_op, proj_hs, drift, closure)


def linear_term_bound(stats: SpectrumStats, E_op: float) -> float:
    """``[1 + (sigma_1^2 - sigma_R^2) / (pi g_R)] ||E||``."""
    _gap(stats)
    return (1.0 + (stats.sigma1_sq - stats.sigmaR_sq) / (math.pi * stats.g_R)) * E_op


def residual_term_bound(stats: SpectrumStats, E_op: float) -> float:
    """``K_R (||E|| / g_R)^2``."""
    _gap(stats)
    return stats.K_R * (E_op / stats.g_R) ** 2


def fve_gap_bound(report: PerturbationReport) -> float:
    """Pathwise bound on ``|FVE_hat - FVE_tilde|``: the projection distance."""
    return report.proj_op


# ---------------------------------------------------------------------------
# bound formulas


@dataclass(frozen=True)
class BoundResult:
    error_bound: float
    success_prob: float
    eps_feasible: bool
    V: float
    L: float


def _gap(stats: SpectrumStats):
    if not stats.g_R > 0.0:
        raise EigengapError(f"eigengap g_R = {stats.g_R:.3g} <= 0; bound undefined")


def _bound_args(stats: SpectrumStats, R: int, beta: float, eps: float):
    _gap(stats)
    if R != stats.R:
        raise ConsistencyError(f"stats were computed at R={stats.R}, not {R}")
    if beta < 1.0:
        raise ParameterError(f"beta must be >= 1, got {beta}")
    if not eps > 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")


def fpca_vl(stats: SpectrumStats, beta: float) -> tuple[float, float]:
    """V and L of the projection bound."""
    G = stats.G_R
    Z = beta * stats.dim
    V = max(G * G * Z * Z / (2.0 * beta), Z)
    L = max(G * Z / math.sqrt(2.0), Z + 1.0)
    return V, L


def fpca_bound(stats: SpectrumStats, R: int, beta: float, C: int, eps: float) -> BoundResult:
    """Projection-error bound ``eps + K_R sigma_1^4 eps^2 / g_R^2`` and its probability."""
    _bound_args(stats, R, beta, eps)
    V, L = fpca_vl(stats, beta)
    bound = eps + stats.K_R * stats.sigma1_sq ** 2 * eps * eps / stats.g_R ** 2
    prob = 1.0 - 12.0 * stats.dim * math.exp(-(C * eps * eps / 2.0) / (V + L * eps / 3.0))
    feasible = eps * C >= math.sqrt(C * V) + L / 3.0
    return BoundResult(bound, min(max(prob, 0.0), 1.0), feasible, V, L)


def flr_vl(stats: SpectrumStats, beta: float) -> tuple[float, float]:
    """V and L of the regression bound."""
    G = stats.G_R
    Z2 = beta * stats.dim
    V = 2.0 + (2.0 + G * G) * Z2 * Z2 / beta
    L = math.sqrt(2.0 * stats.R) + (math.sqrt(2.0) + G / math.sqrt(2.0)) * Z2
    return V, L


def flr_bound(stats: SpectrumStats, R: int, beta: float, C: int, eps: float,
              y_norm: float, yperp_norm: float) -> BoundResult:
    """Prediction-error bound ``(eps + sigma_R Z1 eps^2 / sigma_1) ||Y||_N + 4 (eps + Z1 eps^2) ||Y_perp||_N``."""
    _bound_args(stats, R, beta, eps)
    s1, sR = stats.sigma1_sq, stats.sigmaR_sq
    Z1 = s1 ** 3 * stats.K_R / (stats.g_R ** 2 * sR)
    Z2 = beta * stats.dim
    V, L = flr_vl(stats, beta)
    bound = ((eps + math.sqrt(sR) * Z1 * eps * eps / math.sqrt(s1)) * y_norm
             + 4.0 * (eps + Z1 * eps * eps) * yperp_norm)
    prob = (1.0 - 16.0 * stats.dim * math.exp(-C * eps * eps / (V + L * eps / 3.0))
            - 3.0 * Z2 / (eps * eps * C))
    feasible = (eps >= math.sqrt(V / C) + L / (3.0 * C)) and eps <= min(1.0, stats.g_R / 3.0)
    return BoundResult(bound, prob, feasible, V, L)


@dataclass(frozen=True)
class PilotBeta:
    beta: float
    finite: bool
    gamma0: float
    gamma1: float
    gamma2: float


def pilot_beta(stats: SpectrumStats, C: int) -> PilotBeta:
    """Near-exactness factor of the pilot probability at pilot size C.

    ``beta`` is ``+inf`` (``finite`` False) when C is too small for the
    formula's denominator to be positive.
    """
    _gap(stats)
    s1, sR, g = stats.sigma1_sq, stats.sigmaR_sq, stats.g_R
    d0 = stats.delta_0
    gamma0 = math.sqrt((d0 + 1.0) * math.log(120.0 * d0))
    gamma1 = 35.0 * (1.0 + stats.G_R) * stats.dim + 8.0 * s1 * gamma0 / sR
    gamma2 = 32.0 * stats.K_R * s1 ** 3 * stats.G_R ** 2 / (g * g * sR)
    t = gamma1 / math.sqrt(C) + gamma2 / C
    if 1.0 - t <= 0.0:
        return PilotBeta(math.inf, False, gamma0, gamma1, gamma2)
    return PilotBeta((1.0 + t) / (1.0 - t), True, gamma0, gamma1, gamma2)


def measured_beta(p_exact, p_hat) -> float:
    """``max_n max(p_exact / p_hat, p_hat / p_exact)``."""
    a = np.asarray(p_exact, dtype=np.float64)
    b = np.asarray(p_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError("probability vectors differ in length")
    with np.errstate(divide="ignore"):
        r = a / b
    return float(np.max(np.maximum(r, 1.0 / r)))


def first_order_magnitude(stats: SpectrumStats, C: int) -> float:
    """``(R + Delta_R) sqrt(log(120 (R + Delta_R))) / sqrt(C)``."""
    d = stats.dim
    return d * math.sqrt(math.log(120.0 * d)) / math.sqrt(C)
