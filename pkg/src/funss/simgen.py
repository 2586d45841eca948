"""Synthetic functional data: truncated Fourier expansions with random scores."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fda import FunctionalDataset, Grid
from .rflr import ResponseVector, predict
from .rng import stream

DEFAULT_K = 50
DEFAULT_L = 256


class EigenKind(str, enum.Enum):
    ED = "ed"   # exponential decay
    PD = "pd"   # polynomial decay


class ScoreKind(str, enum.Enum):
    NU = "nu"   # standard normal
    MN = "mn"   # t with 3 df, unit variance
    VN = "vn"   # t with 1 df, unscaled


def fourier_capacity(L: int) -> int:
    """Largest K whose Fourier rows stay exactly orthonormal on the L-point midpoint grid."""
    return max((L - 1) // 2, 0)


@dataclass(frozen=True)
class SimDesign:
    eigen_kind: EigenKind = EigenKind.ED
    score_kind: ScoreKind = ScoreKind.NU
    K: int | None = None
    N: int = 10_000
    L: int = DEFAULT_L
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "eigen_kind", EigenKind(self.eigen_kind))
        object.__setattr__(self, "score_kind", ScoreKind(self.score_kind))
        if self.N < 1 or self.L < 2:
            raise ParameterError(f"need N >= 1 and L >= 2, got N={self.N}, L={self.L}")
        cap = fourier_capacity(self.L)
        K = min(DEFAULT_K, cap) if self.K is None else int(self.K)
        if not 1 <= K <= cap:
            raise ParameterError(f"K={K} outside 1..{cap} for a grid of L={self.L} points")
        object.__setattr__(self, "K", K)

    @property
    def grid(self) -> Grid:
        return Grid.uniform(self.L)

    def describe(self) -> dict:
        return {"eigen": self.eigen_kind.value, "score": self.score_kind.value,
                "K": self.K, "N": self.N, "L": self.L, "seed": int(self.seed)}


def fourier_basis(L: int, K: int) -> np.ndarray:
    """Rows ``sqrt(2) sin(2 pi r t)`` (r odd) and ``sqrt(2) cos(2 pi r t)`` (r even) on the midpoint grid."""
    t = Grid.uniform(L).points
    r = np.arange(1, K + 1)[:, None]
    arg = 2.0 * np.pi * r * t[None, :]
    return np.sqrt(2.0) * np.where(r % 2 == 1, np.sin(arg), np.cos(arg))


def eigen_schedule(kind: EigenKind | str, K: int) -> np.ndarray:
    """Population eigenvalues ``sigma_r^2`` for r = 1..K."""
    kind = EigenKind(kind)
    r = np.arange(1, K + 1, dtype=np.float64)
    if kind is EigenKind.ED:
        return 2.0 ** 51 * 0.5 ** r
    return 100.0 * r ** -1.5


def draw_scores(kind: ScoreKind | str, N: int, K: int, seed: int) -> np.ndarray:
    """i.i.d. N x K scores; t variates are normals over ``sqrt(chi2 / df)``."""
    kind = ScoreKind(kind)
    rng = stream(seed, "scores")
    z = rng.standard_normal((N, K))
    if kind is ScoreKind.NU:
        return z
    df = 3 if kind is ScoreKind.MN else 1
    t = z / np.sqrt(rng.chisquare(df, (N, K)) / df)
    return t / np.sqrt(3.0) if kind is ScoreKind.MN else t


def synth_dataset(design: SimDesign, scores: np.ndarray | None = None) -> FunctionalDataset:
    """Rows ``x_n = sum_r sigma_r xi_nr theta_r`` (raw, not centered).

    ``scores`` overrides the random draws (N x K).
    """
    if scores is None:
        scores = draw_scores(design.score_kind, design.N, design.K, design.seed)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (design.N, design.K):
        raise ParameterError(f"scores must be {design.N} x {design.K}, got {scores.shape}")
    sig = np.sqrt(eigen_schedule(design.eigen_kind, design.K))
    values = (scores * sig) @ fourier_basis(design.L, design.K)
    return FunctionalDataset(design.grid, values)


def synth_regression(design: SimDesign, noise_sd: float = 1.0, scores: np.ndarray | None = None):
    """``(dataset, Y, psi)`` with ``psi = sum_r theta_r`` and ``Y_n = <x_n, psi> + e_n``.

    ``noise_sd`` scales the N(0, 1) noise; zero gives noiseless responses.
    """
    data = synth_dataset(design, scores)
    psi = fourier_basis(design.L, design.K).sum(axis=0)
    noise = stream(design.seed, "noise").standard_normal(design.N)
    y = predict(data, psi) + noise_sd * noise
    return data, ResponseVector(y), psi


TOY_SIGMAS = (10.0, 2.0, 0.1)
TOY_DIRECTIONS = np.array([[1.0, 1.0, 0.0, 0.0],
                           [1.0, -1.0, 0.0, 0.0],
                           [0.0, 0.0, 1.0, 1.0]]) / np.sqrt(2.0)


def toy_example(N: int = 1000, seed: int = 0, return_scores: bool = False):
    """Three normal components in R^4 with scales 10, 2 and 0.1.

    The "grid" has four points with unit weights, so the inner product is
    the Euclidean one.
    """
    xi = stream(seed, "toy").standard_normal((N, 3))
    values = (xi * np.asarray(TOY_SIGMAS)) @ TOY_DIRECTIONS
    grid = Grid(np.arange(4.0), np.ones(4))
    data = FunctionalDataset(grid, values)
    return (data, xi) if return_scores else data
