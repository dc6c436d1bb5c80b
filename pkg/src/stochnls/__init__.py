"""Finite difference simulation of the stochastic cubic Schrodinger equation on (0, 1)."""

__version__ = "0.1.0"

from .grid import (  # noqa: E402
    GridFunction,
    GridMismatchError,
    UniformGrid,
    backward_diff,
    discrete_laplacian,
    forward_diff,
    inner_h,
    norm_h,
    norm_l4h,
    norm_linf,
    restrict,
)
from .noise import COSINE, SINE, NoiseIncrement, SpectralCovariance, evaluate_fq, fork_stream, hs_norm, sample_increment  # noqa: E402
from .scheme import BlowUp, FixedPointDiverged, SchemeConfig, TrajectoryState, drift, evolve, step  # noqa: E402

__all__ = [
    "COSINE",
    "SINE",
    "BlowUp",
    "FixedPointDiverged",
    "GridFunction",
    "GridMismatchError",
    "NoiseIncrement",
    "SchemeConfig",
    "SpectralCovariance",
    "TrajectoryState",
    "UniformGrid",
    "backward_diff",
    "discrete_laplacian",
    "drift",
    "evaluate_fq",
    "evolve",
    "fork_stream",
    "forward_diff",
    "hs_norm",
    "inner_h",
    "norm_h",
    "norm_l4h",
    "norm_linf",
    "restrict",
    "sample_increment",
    "step",
]
