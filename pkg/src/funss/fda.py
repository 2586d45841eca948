"""Discretized L2 functions: grids, datasets, spectral models and scores.

A function on a grid of L points is a length-L vector ``u``; the inner
product is the quadrature sum ``sum_i w_i u_i v_i``.  Internally most
linear algebra runs in *whitened* coordinates ``u * sqrt(w)`` where the
quadrature inner product becomes the Euclidean one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DimensionError, ParameterError

#: Eigenvalues below this fraction of the leading one count as zero.
RANK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Abscissae and positive quadrature weights of a discretized domain."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64).ravel()
        weights = np.array(self.weights, dtype=np.float64).ravel()
        if points.shape != weights.shape:
            raise DimensionError(
                f"grid has {points.size} points but {weights.size} weights")
        if points.size < 1:
            raise DimensionError("grid must have at least one point")
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise ParameterError("grid points and weights must be finite")
        if np.any(np.diff(points) <= 0):
            k = int(np.argmax(np.diff(points) <= 0)) + 1
            raise ParameterError(f"grid points must increase strictly (index {k})")
        if np.any(weights <= 0):
            raise ParameterError("quadrature weights must be positive")
        points.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, L: int, a: float = 0.0, b: float = 1.0) -> "Grid":
        """Midpoint rule on ``[a, b]``: ``t_i = a + (i + 1/2) h``, ``w_i = h``."""
        if L < 1 or b <= a:
            raise ParameterError(f"need L >= 1 and a < b, got L={L}, [{a}, {b}]")
        h = (b - a) / L
        return cls(a + (np.arange(L) + 0.5) * h, np.full(L, h))

    def __len__(self):
        return self.points.size

    @property
    def L(self) -> int:
        return self.points.size

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.L == other.L
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights))


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """N functions sampled on a shared grid; row n holds x_n."""

    grid: Grid
    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[1] != self.grid.L:
            raise DimensionError(
                f"values of shape {values.shape} do not match a grid of {self.grid.L} points")
        if values.shape[0] < 1 or values.shape[1] < 2:
            raise DimensionError(
                f"a dataset needs N >= 1 functions on L >= 2 points, got {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = int(np.argmax(~np.all(np.isfinite(values), axis=1)))
            raise ParameterError(f"row {bad} has non-finite entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def L(self) -> int:
        return self.values.shape[1]

    @cached_property
    def whitened(self) -> np.ndarray:
        """``values * sqrt(w)``: rows whose Euclidean geometry is the L2 one."""
        out = self.values * self.grid.sqrt_weights
        out.flags.writeable = False
        return out

    @cached_property
    def sqnorms(self) -> np.ndarray:
        """Squared quadrature norms ``||x_n||^2``."""
        xw = self.whitened
        return np.einsum("ij,ij->i", xw, xw)

    def is_centered(self, tol: float = 1e-10) -> bool:
        scale = float(np.max(np.abs(self.values)))
        if scale == 0.0:
            return True
        return float(np.max(np.abs(self.values.mean(axis=0)))) <= tol * scale

    def subset(self, rows) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, self.values[rows], centered=False)


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """Ranked eigenpairs of a covariance operator.

    ``trace`` is the total variance of the operator (sum of *all*
    eigenvalues); it defaults to the sum of the stored ones.  ``truncated``
    flags a model holding fewer pairs than were asked for.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    grid: Grid
    trace: float | None = None
    truncated: bool = False
    requested_rank: int | None = None

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=np.float64).ravel()
        phi = np.array(self.eigenfunctions, dtype=np.float64).reshape(lam.size, -1)
        if phi.shape[1] != self.grid.L:
            raise DimensionError(
                f"eigenfunctions have {phi.shape[1]} points, grid has {self.grid.L}")
        if np.any(lam < 0):
            raise ParameterError("eigenvalues must be nonnegative")
        if np.any(np.diff(lam) > 0):
            raise ParameterError("eigenvalues must be nonincreasing")
        if lam.size:
            vw = phi * self.grid.sqrt_weights
            gram = vw @ vw.T
            dev = float(np.max(np.abs(gram - np.eye(lam.size))))
            if dev > 1e-8:
                raise ParameterError(
                    f"eigenfunctions are not orthonormal (max Gram deviation {dev:.2e})")
        lam.flags.writeable = False
        phi.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenfunctions", phi)
        trace = float(lam.sum()) if self.trace is None else float(self.trace)
        object.__setattr__(self, "trace", trace)

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @cached_property
    def whitened(self) -> np.ndarray:
        """Eigenfunctions in whitened coordinates, as columns (L x K)."""
        out = (self.eigenfunctions * self.grid.sqrt_weights).T.copy()
        out.flags.writeable = False
        return out

    def head(self, R: int) -> "SpectralModel":
        if R > self.rank:
            raise ParameterError(f"model holds {self.rank} eigenpairs, asked for {R}")
        return SpectralModel(self.eigenvalues[:R], self.eigenfunctions[:R],
                             self.grid, trace=self.trace)


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    scores: np.ndarray
    source_rank: int = field(default=0)


def _check_grid(dataset: FunctionalDataset, model: SpectralModel):
    if not dataset.grid.same_as(model.grid):
        raise DimensionError("dataset and spectral model live on different grids")


def _check_rank(model: SpectralModel, R: int):
    if not 0 <= R <= model.rank:
        raise ParameterError(f"rank R={R} outside 0..{model.rank}")


def inner_product(u, v, grid: Grid) -> float:
    """Quadrature inner product ``sum_i w_i u_i v_i``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != (grid.L,) or v.shape != (grid.L,):
        raise DimensionError(
            f"expected two vectors of length {grid.L}, got {u.shape} and {v.shape}")
    return float(np.sum(grid.weights * u * v))


def norm(u, grid: Grid) -> float:
    return float(np.sqrt(inner_product(u, u, grid)))


def center(dataset: FunctionalDataset) -> FunctionalDataset:
    """Subtract the pointwise mean function from every row."""
    values = dataset.values - dataset.values.mean(axis=0)
    return FunctionalDataset(dataset.grid, values, centered=True)


def coefficients(dataset: FunctionalDataset, model: SpectralModel, R: int) -> np.ndarray:
    """Matrix of ``<x_n, theta_r>`` for r < R (N x R)."""
    _check_grid(dataset, model)
    _check_rank(model, R)
    return dataset.whitened @ model.whitened[:, :R]


def compute_scores(dataset: FunctionalDataset, model: SpectralModel, R: int) -> ScoreMatrix:
    """Principal component scores ``<x_n, theta_r> / sigma_r``.

    Columns whose eigenvalue is zero are set to one.
    """
    coef = coefficients(dataset, model, R)
    sig = model.sigmas[:R]
    scores = np.ones_like(coef)
    pos = sig > 0
    scores[:, pos] = coef[:, pos] / sig[pos]
    return ScoreMatrix(scores, source_rank=R)


def projection_parts(dataset: FunctionalDataset, model: SpectralModel, R: int):
    """Coefficients ``<x_n, theta_r>`` (N x R) and residuals ``||(I - P_R) x_n||^2``.

    One pass over the data using the cached row norms; residuals are
    clamped at zero.
    """
    _check_grid(dataset, model)
    _check_rank(model, R)
    if R == 0:
        return np.zeros((dataset.N, 0)), dataset.sqnorms.copy()
    coef = _kernels.project(dataset.whitened, model.whitened[:, :R])
    res = dataset.sqnorms - np.einsum("ij,ij->i", coef, coef)
    return coef, np.maximum(res, 0.0)


def residual_norms(dataset: FunctionalDataset, model: SpectralModel, R: int) -> np.ndarray:
    """``||(I - P_R) x_n||^2`` for every row, clamped at zero."""
    return projection_parts(dataset, model, R)[1]


def project_functions(values, model: SpectralModel, R: int) -> np.ndarray:
    """Apply ``P_R`` to each row of ``values`` (grid functions)."""
    _check_rank(model, R)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.shape[1] != model.grid.L:
        raise DimensionError("functions and model have different grid sizes")
    sw = model.grid.sqrt_weights
    v = model.whitened[:, :R]
    return ((values * sw) @ v @ v.T) / sw
