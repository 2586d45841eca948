"""Randomized FPCA and functional linear regression by weighted subsampling."""
__version__ = "0.1.0"

from .errors import DataError, FunssError, NumericalError  # noqa: E402
from .fda import FunctionalDataset, Grid, ScoreMatrix, SpectralModel  # noqa: E402
from .rfpca import cov_subsampled, fpca_full, fpca_randomized, fve  # noqa: E402
from .rflr import ResponseVector, RegressionFit, flr_full, flr_randomized, predict  # noqa: E402
from .sampling import (  # noqa: E402
    SamplingDistribution,
    SubsampleDraw,
    draw_with_replacement,
    estimate_funprinss,
    prob_funprinss_exact,
    prob_impo,
    prob_mixture,
    prob_uniform,
)

__all__ = [
    "DataError", "FunssError", "NumericalError",
    "FunctionalDataset", "Grid", "ScoreMatrix", "SpectralModel",
    "cov_subsampled", "fpca_full", "fpca_randomized", "fve",
    "ResponseVector", "RegressionFit", "flr_full", "flr_randomized", "predict",
    "SamplingDistribution", "SubsampleDraw", "draw_with_replacement", "estimate_funprinss",
    "prob_funprinss_exact", "prob_impo", "prob_mixture", "prob_uniform",
]
