"""Functional linear regression with scalar response.

With centered data the model is ``Y_n = <x_n, Psi> + e_n``.  The rank-R
estimator applies the truncated inverse ``C^+ = sum_r theta_r (x) theta_r / sigma_r^2``
of a covariance operator to the cross-covariance ``z = (1/N) sum_n Y_n x_n``.
The operator ``T u = (<x_1, u>, ..., <x_N, u>)`` maps grid functions to R^N.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConsistencyError, DimensionError, NotCenteredError, ParameterError, RankDeficiencyError
from .fda import FunctionalDataset, SpectralModel
from .rfpca import cov_subsampled, fpca_full, fpca_sketch
from .sampling import SamplingDistribution, SubsampleDraw, draw_with_replacement


@dataclass(frozen=True, eq=False)
class ResponseVector:
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        y = np.array(self.values, dtype=np.float64).ravel()
        if y.size < 1 or not np.all(np.isfinite(y)):
            raise ParameterError("response must be a nonempty vector of finite values")
        y.flags.writeable = False
        object.__setattr__(self, "values", y)

    @property
    def N(self) -> int:
        return self.values.size

    def is_centered(self, tol: float = 1e-10) -> bool:
        scale = float(np.max(np.abs(self.values)))
        return scale == 0.0 or abs(float(self.values.mean())) <= tol * scale

    def centered_copy(self) -> "ResponseVector":
        return ResponseVector(self.values - self.values.mean(), centered=True)


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """A rank-R regression estimate.

    ``residual`` is ``Y - T psi`` and is only set for full-sample fits.
    ``conditioning`` is ``sigma_R^2 / sigma_1^2`` of the model used.
    """

    psi: np.ndarray
    rank: int
    fitted: np.ndarray
    residual: np.ndarray | None
    model: SpectralModel
    draw: SubsampleDraw | None = None
    conditioning: float = 1.0


class FLRTerms(NamedTuple):
    I: np.ndarray
    II: np.ndarray
    III: np.ndarray


def norm_N(a) -> float:
    """Normalized Euclidean norm ``sqrt((1/N) sum a_n^2)`` on R^N."""
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.mean(a * a)))


def _require_centered(dataset: FunctionalDataset, Y: ResponseVector):
    if Y.N != dataset.N:
        raise DimensionError(f"response has {Y.N} entries, dataset has {dataset.N} rows")
    if not dataset.is_centered():
        raise NotCenteredError("functional data must be centered before regression")
    if not Y.is_centered():
        raise NotCenteredError("response must be centered before regression")


def predict(dataset: FunctionalDataset, psi) -> np.ndarray:
    """``T psi``: the inner products ``<x_n, psi>``."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != (dataset.L,):
        raise DimensionError(f"psi has shape {psi.shape}, grid has {dataset.L} points")
    return dataset.whitened @ (psi * dataset.grid.sqrt_weights)


def _truncated_inverse(model: SpectralModel, R: int, uw: np.ndarray) -> np.ndarray:
    """Apply ``C^+`` of rank R in whitened coordinates."""
    v = model.whitened[:, :R]
    return v @ ((v.T @ uw) / model.eigenvalues[:R])


def _fit(dataset: FunctionalDataset, model: SpectralModel, R: int, zw: np.ndarray):
    sw = dataset.grid.sqrt_weights
    psi_w = _truncated_inverse(model, R, zw)
    fitted = dataset.whitened @ psi_w
    cond = float(model.eigenvalues[R - 1] / model.eigenvalues[0])
    return psi_w / sw, fitted, cond


def _check_model_rank(model: SpectralModel, R: int, what: str):
    if model.rank < R or model.eigenvalues[R - 1] <= 0.0:
        raise RankDeficiencyError(
            f"{what} covariance has numerical rank {model.rank}; cannot invert at rank R={R}")


def flr_full(dataset: FunctionalDataset, Y: ResponseVector, R: int,
             model: SpectralModel | None = None) -> RegressionFit:
    """Full-sample rank-R estimator ``Psi_hat = C_hat^+ z_hat``.

    ``model`` may carry a precomputed full-sample FPCA of ``dataset``.
    """
    _require_centered(dataset, Y)
    if model is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            model = fpca_full(dataset, min(R, dataset.N, dataset.L))
    _check_model_rank(model, R, "full-sample")
    zw = dataset.whitened.T @ Y.values / dataset.N
    psi, fitted, cond = _fit(dataset, model, R, zw)
    return RegressionFit(psi, R, fitted, Y.values - fitted, model, None, cond)


def flr_randomized(dataset: FunctionalDataset, Y: ResponseVector, dist: SamplingDistribution,
                   C: int, R: int, seed: int, draw: SubsampleDraw | None = None) -> RegressionFit:
    """Randomized estimator ``Psi_tilde = C_tilde^+ z_tilde`` from C weighted draws.

    Fitted values are evaluated on the full dataset.  Passing ``draw``
    bypasses sampling (``dist``, ``C`` and ``seed`` are then ignored).
    """
    _require_centered(dataset, Y)
    if draw is None:
        if C < R:
            raise ParameterError(f"subsample size C={C} is below R={R}")
        draw = draw_with_replacement(dist, C, seed)
    sketch = cov_subsampled(dataset, draw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fpca_sketch(sketch, R)
    _check_model_rank(model, R, "subsampled")
    scale = 1.0 / np.sqrt(draw.C * dataset.N * draw.probs)
    zw = sketch.whitened.T @ (Y.values[draw.indices] * scale)
    psi, fitted, cond = _fit(dataset, model, R, zw)
    return RegressionFit(psi, R, fitted, None, model, draw, cond)


def orthogonality_residual(dataset: FunctionalDataset, full_fit: RegressionFit) -> np.ndarray:
    """``T C_hat^+ T* Y_perp``, which vanishes for a full-sample fit."""
    if full_fit.residual is None:
        raise ConsistencyError("orthogonality is defined for full-sample fits only")
    tstar = dataset.whitened.T @ full_fit.residual / dataset.N
    return dataset.whitened @ _truncated_inverse(full_fit.model, full_fit.rank, tstar)


def flr_error_decomposition(dataset: FunctionalDataset, Y: ResponseVector,
                            full_fit: RegressionFit, sub_fit: RegressionFit,
                            draw: SubsampleDraw) -> FLRTerms:
    """Split ``T Psi_tilde - T Psi_hat`` into three terms.

    ``I = T (P_tilde - P_hat) T^+ Y``,
    ``II = T (C_tilde^+ - C_hat^+) T* D*D Y_perp`` and
    ``III = T C_hat^+ T* D*D Y_perp``, where ``D*D`` is the diagonal
    reweighting ``count_n / (C p_n)`` of the draw.
    """
    if full_fit.residual is None:
        raise ConsistencyError("full_fit must be a full-sample fit")
    if sub_fit.draw is None or not sub_fit.draw.same_as(draw):
        raise ConsistencyError("sub_fit was not produced by the given draw")
    if sub_fit.rank != full_fit.rank:
        raise ConsistencyError(f"fits use ranks {full_fit.rank} and {sub_fit.rank}")
    if full_fit.fitted.size != dataset.N or Y.N != dataset.N:
        raise ConsistencyError("fits, response and dataset disagree on N")
    R = full_fit.rank
    xw = dataset.whitened
    sw = dataset.grid.sqrt_weights
    vt = sub_fit.model.whitened[:, :R]

    # T^+ Y is the full-sample estimate itself; P_hat leaves it fixed.
    psi_hat_w = full_fit.psi * sw
    term1 = xw @ (vt @ (vt.T @ psi_hat_w) - psi_hat_w)

    weighted = draw.multiplicity(dataset.N) * full_fit.residual
    tstar = xw.T @ weighted / dataset.N
    hat_part = _truncated_inverse(full_fit.model, R, tstar)
    tilde_part = _truncated_inverse(sub_fit.model, R, tstar)
    term2 = xw @ (tilde_part - hat_part)
    term3 = xw @ hat_part
    return FLRTerms(term1, term2, term3)
