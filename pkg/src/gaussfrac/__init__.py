"""Fractional Sobolev tools on finite-dimensional Gaussian space.

Hermite spectral calculus for the Ornstein-Uhlenbeck operator, the weighted
extension problem, Ehrhard symmetrisation and fractional Gaussian perimeters.
"""

from gaussfrac.gauss_core import (
    GridFunction,
    QuadratureRule,
    TensorGrid,
    cylindrical_projection,
    gauss_hermite_rule,
    hermite,
    integrate,
    make_grid,
    std_normal_cdf,
    std_normal_quantile,
)
from gaussfrac.ou_spectral import (
    FracParams,
    HermiteSeries,
    analyze,
    frac_laplacian,
    frac_laplacian_integral,
    ou_semigroup,
    seminorm_spectral,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "FracParams",
    "GridFunction",
    "HermiteSeries",
    "QuadratureRule",
    "TensorGrid",
    "analyze",
    "cylindrical_projection",
    "frac_laplacian",
    "frac_laplacian_integral",
    "gauss_hermite_rule",
    "hermite",
    "integrate",
    "make_grid",
    "ou_semigroup",
    "seminorm_spectral",
    "std_normal_cdf",
    "std_normal_quantile",
    "synthesize",
]
