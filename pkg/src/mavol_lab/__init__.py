"""Numerical laboratory for Monge-Ampere volumes of direct-image bundles.

The model is the fibration P^1 x P^1 -> P^1 with a catalog of Kahler
potentials. Modules, bottom-up: numerics, geometry, bergman, toeplitz,
directimage, mavol, sympow, cli.
"""
from .geometry import FiberedWeight
from .bergman import gram_matrix, bergman_kernel
from .toeplitz import symbol, symbol_matrix, toeplitz_matrix
from .directimage import FamilyGram, curvature_at
from .mavol import asymptotic_rhs, mavol, mavol_report, saturation_residual
from .sympow import SplitBundle, sympow_mavol_rescaled

__all__ = [
    "FiberedWeight",
    "gram_matrix",
    "bergman_kernel",
    "symbol",
    "symbol_matrix",
    "toeplitz_matrix",
    "FamilyGram",
    "curvature_at",
    "asymptotic_rhs",
    "mavol",
    "mavol_report",
    "saturation_residual",
    "SplitBundle",
    "sympow_mavol_rescaled",
]
__version__ = "0.1.0"
