"""Full-sample and subsampled FPCA.

Both covariance operators are carried by a *factor*: a matrix S (m x L,
whitened coordinates) with ``C = S^T S``.  For the full sample S holds
``x_n / sqrt(N)``; for a subsample it holds ``x_c / sqrt(C N p_c)``.  The
eigensolver decomposes whichever of ``S S^T`` (m x m) or ``S^T S`` (L x L)
is smaller, so no L x L matrix is formed when m < L.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import _kernels
from .errors import InvalidDrawError, ParameterError
from .fda import RANK_TOL, FunctionalDataset, Grid, SpectralModel, projection_parts
from .sampling import SamplingDistribution, SubsampleDraw, draw_with_replacement


@dataclass(frozen=True, eq=False)
class WeightedSketch:
    """Weighted rows whose Gram realizes a covariance operator.

    ``whitened`` is the factor in whitened coordinates; ``draw`` is the
    subsample behind it, or ``None`` for the full-sample factor.
    """

    whitened: np.ndarray
    grid: Grid
    draw: SubsampleDraw | None = None

    @property
    def m(self) -> int:
        return self.whitened.shape[0]

    @cached_property
    def rows(self) -> np.ndarray:
        """Factor rows as grid functions, ``x_c / sqrt(C N p_c)``."""
        return self.whitened / self.grid.sqrt_weights

    @cached_property
    def trace(self) -> float:
        return float(np.einsum("ij,ij->", self.whitened, self.whitened))

    @cached_property
    def normal_matrix(self) -> np.ndarray:
        """``S^T S``: the operator as an L x L matrix in whitened coordinates."""
        return self.whitened.T @ self.whitened

    def apply(self, u) -> np.ndarray:
        """Evaluate the operator on a grid function: ``sum_c <s_c, u> s_c``."""
        u = np.asarray(u, dtype=np.float64)
        sw = self.grid.sqrt_weights
        return (self.whitened.T @ (self.whitened @ (u * sw))) / sw

    def kernel(self) -> np.ndarray:
        """Dense L x L kernel ``K`` with ``(C u)(t) = sum_j K[t, j] w_j u_j``.

        Test oracle only; costs O(m L^2).
        """
        return self.rows.T @ self.rows


def full_sketch(dataset: FunctionalDataset) -> WeightedSketch:
    """Factor of the empirical covariance ``(1/N) sum_n x_n (x) x_n``."""
    return WeightedSketch(dataset.whitened / np.sqrt(dataset.N), dataset.grid)


def cov_subsampled(dataset: FunctionalDataset, draw: SubsampleDraw) -> WeightedSketch:
    """Factor of ``(1/C) sum_c x_c (x) x_c / (N p_c)`` for the given draw."""
    if draw.indices.min() < 0 or draw.indices.max() >= dataset.N:
        raise InvalidDrawError(
            f"draw indices span {draw.indices.min()}..{draw.indices.max()}, dataset has N={dataset.N}")
    scale = 1.0 / np.sqrt(draw.C * dataset.N * draw.probs)
    xw = _kernels.gather_scaled(dataset.whitened, draw.indices, scale)
    return WeightedSketch(xw, dataset.grid, draw)


LANCZOS_MIN_DIM = 128


@lru_cache(maxsize=16)
def _start_vector(n: int) -> np.ndarray:
    # fixed start keeps results reproducible; a constant vector would be
    # orthogonal to zero-mean eigenfunctions
    v = np.random.default_rng(0x5EED).standard_normal(n)
    v.flags.writeable = False
    return v


def _lanczos(op, n: int, k: int):
    """Top-k pairs by implicitly restarted Lanczos, or None if it stalls."""
    if n < LANCZOS_MIN_DIM or 10 * k >= n:
        return None
    try:
        w, v = eigsh(op, k=k, which="LA", tol=0.0, v0=_start_vector(n).copy())
    except ArpackNoConvergence:
        return None
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def _top_eigh(a: np.ndarray, k: int):
    n = a.shape[0]
    found = _lanczos(a, n, k)
    if found is not None:
        return found
    if 4 * k < n:
        w, v = scipy.linalg.eigh(a, subset_by_index=[n - k, n - 1], driver="evr",
                                 check_finite=False)
    else:
        w, v = np.linalg.eigh(a)
        w, v = w[n - k:], v[:, n - k:]
    return w[::-1], v[:, ::-1]


def factor_eigenpairs(s: np.ndarray, k: int):
    """Top-k eigenpairs of ``S^T S`` for a factor S (m x L).

    Returns eigenvalues (descending) and whitened eigenvectors (L x k).
    """
    m, L = s.shape
    k = min(k, m, L)
    if k == 0:
        return np.zeros(0), np.zeros((L, 0))
    if m <= L:
        _, u = _top_eigh(s @ s.T, k)
        # Rayleigh-Ritz on span(S^T u) keeps the vectors orthonormal to
        # machine precision even for tiny eigenvalues.
        q, _ = np.linalg.qr(s.T @ u)
        b = s @ q
        lam, y = np.linalg.eigh(b.T @ b)
        lam, y = lam[::-1], y[:, ::-1]
        v = q @ y
    else:
        op = LinearOperator((L, L), matvec=lambda x: s.T @ (s @ x), dtype=np.float64)
        found = _lanczos(op, L, k)
        lam, v = found if found is not None else _top_eigh(s.T @ s, k)
    return np.maximum(lam, 0.0), v


def _fix_signs(theta: np.ndarray) -> np.ndarray:
    k = np.argmax(np.abs(theta), axis=1)
    sgn = np.sign(theta[np.arange(theta.shape[0]), k])
    sgn[sgn == 0] = 1.0
    return theta * sgn[:, None]


def _model_from_pairs(lam, v, grid: Grid, trace: float, R: int | None) -> SpectralModel:
    complete = R is None
    if lam.size and lam[0] > 0:
        keep = lam > RANK_TOL * lam[0]
    else:
        keep = np.zeros(lam.size, dtype=bool)
    lam, v = lam[keep], v[:, keep]
    theta = _fix_signs((v / grid.sqrt_weights[:, None]).T)
    truncated = not complete and lam.size < R
    if truncated:
        warnings.warn(f"operator has numerical rank {lam.size} < R={R}; model truncated",
                      RuntimeWarning, stacklevel=3)
    return SpectralModel(lam, theta, grid, trace=trace, truncated=truncated, requested_rank=R)


def fpca_sketch(sketch: WeightedSketch, R: int | None) -> SpectralModel:
    """Top-R eigenpairs of the operator carried by ``sketch``.

    Eigenvalues below ``RANK_TOL`` times the leading one are dropped; a
    model with fewer than R pairs comes back flagged ``truncated``.  With
    ``R=None`` every numerically positive pair is returned.
    """
    k = min(sketch.whitened.shape) if R is None else R
    if k < 1:
        raise ParameterError(f"R must be positive, got {R}")
    lam, v = factor_eigenpairs(sketch.whitened, k)
    return _model_from_pairs(lam, v, sketch.grid, sketch.trace, R)


def fpca_full(dataset: FunctionalDataset, R: int | None = None) -> SpectralModel:
    """Eigenpairs of the empirical covariance operator; all positive ones if R is None."""
    N, L = dataset.N, dataset.L
    if R is not None and not 1 <= R <= min(N, L):
        raise ParameterError(f"R={R} outside 1..min(N, L)={min(N, L)}")
    if N <= L:
        return fpca_sketch(full_sketch(dataset), R)
    # tall data: form X^T X once instead of scaling a copy of X
    xw = dataset.whitened
    k = L if R is None else R
    lam, v = _top_eigh((xw.T @ xw) / N, k)
    trace = float(dataset.sqnorms.sum()) / N
    return _model_from_pairs(np.maximum(lam, 0.0), v, dataset.grid, trace, R)


def fpca_randomized(dataset: FunctionalDataset, dist: SamplingDistribution, C: int,
                    R: int, seed: int) -> SpectralModel:
    """Randomized FPCA: draw C rows from ``dist``, decompose the sketch."""
    if C < R:
        raise ParameterError(f"subsample size C={C} is below R={R}")
    if dist.N != dataset.N:
        raise ParameterError(f"distribution covers {dist.N} rows, dataset has {dataset.N}")
    draw = draw_with_replacement(dist, C, seed)
    return fpca_sketch(cov_subsampled(dataset, draw), R)


def fve(dataset: FunctionalDataset, model: SpectralModel, R: int) -> float:
    """Fraction of variance explained by the model's leading R eigenfunctions."""
    total = float(dataset.sqnorms.sum())
    if total <= 0.0:
        raise ParameterError("fraction of variance is undefined for an all-zero dataset")
    if R == 0:
        return 0.0
    coef, _ = projection_parts(dataset, model, R)
    return float(np.einsum("ij,ij->", coef, coef)) / total
