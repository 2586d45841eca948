"""Sampling laws over the N observations and with-replacement draws."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import (
    ConsistencyError,
    DegenerateDistributionError,
    InvalidDrawError,
    ParameterError,
    PilotFailureError,
    RankDeficiencyError,
)
from .fda import FunctionalDataset, SpectralModel, projection_parts
from .rng import stream

#: Floor applied to pilot numerators before normalization.
PILOT_FLOOR = 1e-15


class SamplerKind(str, enum.Enum):
    UNIFORM = "unif"
    IMPO = "impo"
    MIXTURE = "mixture"
    FUNPRINSS_EXACT = "funprinss-exact"
    FUNPRINSS_PILOT = "funprinss"


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    """A probability vector over the rows of a dataset.

    ``params`` records the constructor arguments (``alpha``, ``R``,
    ``C_pilot``, ``normalizer`` ...) so a distribution can describe itself.
    """

    probs: np.ndarray
    kind: SamplerKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).ravel()
        if p.size < 1:
            raise ParameterError("empty probability vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ParameterError("probabilities must be finite and nonnegative")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"probabilities sum to {float(total)!r}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @property
    def N(self) -> int:
        return self.probs.size

    @cached_property
    def alias_table(self):
        return _kernels.alias_build(self.probs)


@dataclass(frozen=True, eq=False)
class SubsampleDraw:
    """C row indices (0-based, with repetition) and their probabilities."""

    indices: np.ndarray
    probs: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64).ravel()
        p = np.array(self.probs, dtype=np.float64).ravel()
        if idx.shape != p.shape or idx.size < 1:
            raise InvalidDrawError("a draw needs matching, nonempty indices and probabilities")
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            c = int(np.argmax(~(p > 0)))
            raise InvalidDrawError(f"draw {c} has probability {float(p[c])!r}; must be > 0")
        idx.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probs", p)

    @property
    def C(self) -> int:
        return self.indices.size

    @classmethod
    def exhaustive(cls, N: int) -> "SubsampleDraw":
        """Every row exactly once with uniform probability (the C = N identity)."""
        return cls(np.arange(N), np.full(N, 1.0 / N))

    def multiplicity(self, N: int) -> np.ndarray:
        """Reweighting ``count_n / (C p_n)`` per row: the ``D*D`` diagonal."""
        if self.indices.max() >= N:
            raise InvalidDrawError(f"draw references row {self.indices.max()} of {N}")
        w = np.zeros(N)
        np.add.at(w, self.indices, 1.0 / (self.C * self.probs))
        return w

    def same_as(self, other: "SubsampleDraw") -> bool:
        return (np.array_equal(self.indices, other.indices)
                and np.array_equal(self.probs, other.probs))


def prob_uniform(N: int) -> SamplingDistribution:
    if N < 1:
        raise ParameterError(f"N must be positive, got {N}")
    return SamplingDistribution(np.full(N, 1.0 / N), SamplerKind.UNIFORM)


def prob_impo(dataset: FunctionalDataset) -> SamplingDistribution:
    """Importance sampling, ``p_n`` proportional to ``||x_n||^2``."""
    sq = dataset.sqnorms
    total = float(sq.sum())
    if total <= 0.0:
        raise DegenerateDistributionError("every row has zero norm")
    return SamplingDistribution(sq / total, SamplerKind.IMPO)


def prob_mixture(dataset: FunctionalDataset, alpha: float) -> SamplingDistribution:
    """``alpha * uniform + (1 - alpha) * impo``."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    N = dataset.N
    if alpha == 1.0:
        p = np.full(N, 1.0 / N)
    elif alpha == 0.0:
        p = prob_impo(dataset).probs
    else:
        p = alpha / N + (1.0 - alpha) * prob_impo(dataset).probs
        p = p / p.sum()
    return SamplingDistribution(p, SamplerKind.MIXTURE, {"alpha": float(alpha)})


def _subspace_numerators(dataset: FunctionalDataset, model: SpectralModel, R: int):
    sig2 = model.eigenvalues[:R]
    coef, res = projection_parts(dataset, model, R)
    return np.sum(coef**2 / sig2, axis=1) + res / sig2[R - 1]


def prob_funprinss_exact(dataset: FunctionalDataset, model: SpectralModel,
                         R: int) -> SamplingDistribution:
    """Functional principal subspace probability from a full-sample model.

    The numerator for row n is ``sum_{r<=R} xi_nr^2 + ||(I-P_R)x_n||^2 / sigma_R^2``.
    The normalizing constant is checked against ``N (R + Delta_R)``.
    """
    if R < 1 or R > model.rank:
        raise ParameterError(f"R={R} outside 1..{model.rank}")
    if model.eigenvalues[R - 1] <= 0.0:
        raise RankDeficiencyError(f"sigma_R^2 = 0 at R={R}")
    num = _subspace_numerators(dataset, model, R)
    total = float(num.sum())
    lam = model.eigenvalues
    tail = max(model.trace - float(lam[:R].sum()), 0.0)
    if model.rank > R and lam[R] > 0:
        bound = dataset.N * (R + tail / lam[R])
    else:
        bound = dataset.N * (R + tail / lam[R - 1])
    if total > bound * (1 + 1e-8) + 1e-12:
        raise ConsistencyError(
            f"normalizer {total:.6g} exceeds N(R + Delta_R) = {bound:.6g}; "
            "is the model the full-sample FPCA of this dataset?")
    return SamplingDistribution(num / total, SamplerKind.FUNPRINSS_EXACT,
                                {"R": R, "normalizer": total, "normalizer_bound": bound})


def estimate_funprinss(dataset: FunctionalDataset, C_pilot: int, R: int,
                       alpha: float = 0.5, seed: int = 0) -> SamplingDistribution:
    """Two-step pilot estimate of the functional principal subspace probability.

    A mixture of uniform and importance sampling drives a pilot randomized
    FPCA of rank R; its eigenpairs replace the full-sample ones in the
    subspace numerator, which is floored at ``PILOT_FLOOR`` and normalized.
    """
    from .rfpca import cov_subsampled, fpca_sketch

    if R < 1 or C_pilot < R + 1:
        raise ParameterError(f"need R >= 1 and C_pilot >= R + 1, got R={R}, C_pilot={C_pilot}")
    mix = prob_mixture(dataset, alpha)
    draw = draw_with_replacement(mix, C_pilot, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pilot = fpca_sketch(cov_subsampled(dataset, draw), R)
    if pilot.rank < R or pilot.eigenvalues[R - 1] <= 0.0:
        raise PilotFailureError(
            f"pilot FPCA recovered rank {pilot.rank} < R={R}; increase C_pilot")
    num = _subspace_numerators(dataset, pilot, R)
    num = np.maximum(num, PILOT_FLOOR)
    return SamplingDistribution(
        num / num.sum(), SamplerKind.FUNPRINSS_PILOT,
        {"R": R, "alpha": float(alpha), "C_pilot": int(C_pilot), "seed": int(seed)})


def draw_with_replacement(dist: SamplingDistribution, C: int, seed: int) -> SubsampleDraw:
    """C i.i.d. categorical draws from ``dist`` via its alias table."""
    if C < 1:
        raise ParameterError(f"C must be positive, got {C}")
    rng = stream(seed)
    u_slot = rng.random(C)
    u_coin = rng.random(C)
    prob, alias = dist.alias_table
    idx = _kernels.alias_lookup(prob, alias, u_slot, u_coin)
    return SubsampleDraw(idx, dist.probs[idx], seed=int(seed))
